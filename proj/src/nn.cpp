#include "jcdi/nn.hpp"

namespace jcdi {

std::vector<double> sinusoidal_embed(int t, int dim) {
    std::vector<double> e(static_cast<size_t>(dim));
    for (int i = 0; i < dim / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / dim);
        e[static_cast<size_t>(2 * i)] = std::sin(t * freq);
        e[static_cast<size_t>(2 * i + 1)] = std::cos(t * freq);
    }
    return e;
}

}  // namespace jcdi
