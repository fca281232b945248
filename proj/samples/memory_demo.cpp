// Cosine-softmax memory addressing in isolation: how hard shrinkage sparsifies
// the addressing weights while keeping them on the simplex.

#include <cstdio>

#include "xvad/model/memory.hpp"

int main() {
  using namespace xvad;
  Rng rng(42);
  MemoryBank<double> bank(8, 4, rng);

  Var<double> query(xvad::Tensor<double>::from_vector(Shape::vec(4), {0.9, -0.1, 0.3, 0.2}));
  const MemoryAddress<double> addr = memory_address(query, bank);

  std::printf("addressing weights (lambda = %.4f):\n", bank.shrink_lambda());
  double total = 0.0;
  for (Index k = 0; k < bank.size(); ++k) {
    std::printf("  m_%lld: %.6f\n", static_cast<long long>(k), addr.weights.value()[k]);
    total += addr.weights.value()[k];
  }
  std::printf("sum = %.9f, fallback = %s\n", total, addr.shrink_fallback ? "yes" : "no");
  std::printf("read-out vector: [%.4f, %.4f, %.4f, %.4f]\n", addr.output.value()[0],
              addr.output.value()[1], addr.output.value()[2], addr.output.value()[3]);
  return 0;
}
