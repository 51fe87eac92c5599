#include "tailaug/core/rng.hpp"

#include <numbers>
#include <numeric>

namespace tailaug::core {

std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) {
    // FNV-1a over the label, then mixed with the parent.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : label) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return mix64(parent ^ mix64(h));
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
    return mix64(parent ^ mix64(index + 0x632be59bd9b4e019ULL));
}

std::uint64_t CounterRng::below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    // Rejection sampling keeps the result unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % bound;
}

double CounterRng::normal() {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

}  // namespace tailaug::core
