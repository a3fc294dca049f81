#include "promptweight/augment.hpp"

#include <algorithm>

#include "promptweight/rng.hpp"

namespace promptweight {

std::vector<Violation> validate_augment_config(const AugmentConfig& cfg) {
    std::vector<Violation> out;
    if (cfg.n_rand < 1) out.push_back({"n_rand", "positive", "n_rand must be >= 1"});
    if (!(cfg.shift_range >= 0.0 && cfg.shift_range <= 1.0))
        out.push_back({"shift_range", "range", "shift_range must lie in [0, 1]"});
    return out;
}

RgbImage rgb_shift(const RgbImage& img, const ChannelShift& deltas) {
    RgbImage out = img;
    auto px = out.data();
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = std::clamp(px[i] + deltas[i % 3], 0.0, 1.0);
    return out;
}

std::vector<ChannelShift> draw_shifts(const AugmentConfig& cfg) {
    require_valid(validate_augment_config(cfg), "augment config");
    Rng rng(cfg.rng_seed);
    std::vector<ChannelShift> shifts(static_cast<std::size_t>(cfg.n_rand));
    for (auto& s : shifts)
        for (auto& d : s)
            d = cfg.shift_range == 0.0 ? 0.0 : rng.uniform(-cfg.shift_range, cfg.shift_range);
    return shifts;
}

std::vector<RgbImage> make_variants(const RgbImage& img, const AugmentConfig& cfg) {
    std::vector<RgbImage> out;
    for (const auto& s : draw_shifts(cfg)) out.push_back(rgb_shift(img, s));
    return out;
}

std::uint64_t image_seed(std::uint64_t base, std::size_t index) { return mix_seed(base, index); }

}  // namespace promptweight
