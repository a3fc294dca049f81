#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "promptweight/image.hpp"
#include "promptweight/model.hpp"

namespace promptweight {

struct AugmentConfig {
    int n_rand = 5;
    double shift_range = 0.1;
    std::uint64_t rng_seed = 0;
};

using ChannelShift = std::array<double, 3>;

std::vector<Violation> validate_augment_config(const AugmentConfig& cfg);

/// Adds one offset per channel and clamps every component to [0, 1].
RgbImage rgb_shift(const RgbImage& img, const ChannelShift& deltas);

/// The per-variant channel offsets make_variants applies, drawn i.i.d. from
/// U[-shift_range, shift_range] in variant-major, R-G-B order.
std::vector<ChannelShift> draw_shifts(const AugmentConfig& cfg);

std::vector<RgbImage> make_variants(const RgbImage& img, const AugmentConfig& cfg);

/// Seed used for the image at `index` of a dataset, so every image gets an
/// independent stream derived from one base seed.
std::uint64_t image_seed(std::uint64_t base, std::size_t index);

}  // namespace promptweight
