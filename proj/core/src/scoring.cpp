#include "promptweight/scoring.hpp"

#include <algorithm>
#include <cctype>

#include "promptweight/errors.hpp"
#include "promptweight/model.hpp"
#include "promptweight/parallel.hpp"

namespace promptweight {

std::string normalize_answer(std::string_view raw) {
    auto strip = [](unsigned char c) { return std::isspace(c) || std::ispunct(c); };
    std::size_t b = 0, e = raw.size();
    while (b < e && strip(static_cast<unsigned char>(raw[b]))) ++b;
    while (e > b && strip(static_cast<unsigned char>(raw[e - 1]))) --e;
    std::string out(raw.substr(b, e - b));
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

AnswerClass classify_answer(std::string_view raw) {
    const std::string s = normalize_answer(raw);
    if (s == "yes") return AnswerClass::Yes;
    if (s == "no") return AnswerClass::No;
    return AnswerClass::Invalid;
}

VqaCell tally_answers(std::span<const AnswerClass> answers, Sign polarity) {
    VqaCell cell;
    for (auto a : answers) {
        if (a == AnswerClass::Invalid) {
            ++cell.invalid;
        } else if ((a == AnswerClass::Yes) == (polarity == Sign::Positive)) {
            ++cell.yes;
        } else {
            ++cell.no;
        }
    }
    return cell;
}

namespace {

ScoreMatrix build(const DatasetManifest& ds, const PromptSet& ps, const ScoreBackend& backend,
                  const AugmentConfig& aug, const BuildOptions& opts, Task task) {
    if (ps.task != task)
        throw MismatchError("prompt set task is " + to_string(ps.task) + ", expected " +
                            to_string(task));
    if (!backend.supports(task))
        throw BackendError("backend " + backend.identifier() + " does not support " +
                           to_string(task));
    require_valid(validate_prompt_set(ps), "prompt set");
    require_valid(validate_manifest(ds), "dataset manifest");
    require_valid(validate_augment_config(aug), "augment config");

    const std::size_t n_images = ds.images.size();
    const std::size_t n_prompts = ps.size();
    const std::size_t n_rand = static_cast<std::size_t>(aug.n_rand);

    // Variants are generated up front; each image uses its own seeded stream.
    std::vector<std::vector<RgbImage>> variants(n_images);
    if (backend.needs_pixels()) {
        parallel_for(n_images, opts.jobs, [&](std::size_t j) {
            std::filesystem::path path = ds.images[j].path;
            if (path.is_relative() && !opts.base_dir.empty()) path = opts.base_dir / path;
            AugmentConfig per_image = aug;
            per_image.rng_seed = image_seed(aug.rng_seed, j);
            variants[j] = make_variants(load_image(path), per_image);
        });
    }

    // (image, variant) -> per-prompt raw result, one request per slot.
    std::vector<std::vector<AnswerClass>> answers(task == Task::Vqa ? n_images * n_rand : 0);
    std::vector<std::vector<double>> sims(task == Task::Itr ? n_images * n_rand : 0);

    parallel_for(n_images * n_rand, opts.jobs, [&](std::size_t slot) {
        const std::size_t j = slot / n_rand, k = slot % n_rand;
        VariantRef ref{ds.images[j].id, k,
                       backend.needs_pixels() ? &variants[j][k] : nullptr};
        if (task == Task::Vqa) {
            auto raw = backend.answer_vqa(ref, ps.prompts);
            if (raw.size() != n_prompts)
                throw BackendError("backend returned " + std::to_string(raw.size()) +
                                   " answers for " + std::to_string(n_prompts) + " questions");
            auto& out = answers[slot];
            out.reserve(n_prompts);
            for (const auto& a : raw) out.push_back(classify_answer(a));
        } else {
            auto s = backend.score_itr(ref, ps.prompts);
            if (s.size() != n_prompts)
                throw BackendError("backend returned " + std::to_string(s.size()) +
                                   " similarities for " + std::to_string(n_prompts) + " texts");
            for (double x : s)
                if (!(x >= -1.0 && x <= 1.0))
                    throw BackendError("backend similarity outside [-1, 1]");
            sims[slot] = std::move(s);
        }
    });

    ScoreMatrix m;
    m.task = task;
    m.n_rand = aug.n_rand;
    for (const auto& p : ps.prompts) m.prompt_ids.push_back(p.id);
    m.provenance = {backend.identifier(), aug.rng_seed};
    for (std::size_t j = 0; j < n_images; ++j) {
        ImageRecord rec{ds.images[j].id, ds.images[j].label, {}};
        rec.cells.reserve(n_prompts);
        for (std::size_t i = 0; i < n_prompts; ++i) {
            if (task == Task::Vqa) {
                std::vector<AnswerClass> col(n_rand);
                for (std::size_t k = 0; k < n_rand; ++k) col[k] = answers[j * n_rand + k][i];
                rec.cells.emplace_back(tally_answers(col, ps.prompts[i].polarity));
            } else {
                ItrCell cell;
                for (std::size_t k = 0; k < n_rand; ++k) cell.sims.push_back(sims[j * n_rand + k][i]);
                rec.cells.emplace_back(std::move(cell));
            }
        }
        m.images.push_back(std::move(rec));
    }
    return m;
}

}  // namespace

ScoreMatrix build_vqa_matrix(const DatasetManifest& ds, const PromptSet& ps,
                             const ScoreBackend& backend, const AugmentConfig& aug,
                             const BuildOptions& opts) {
    return build(ds, ps, backend, aug, opts, Task::Vqa);
}

ScoreMatrix build_itr_matrix(const DatasetManifest& ds, const PromptSet& ps,
                             const ScoreBackend& backend, const AugmentConfig& aug,
                             const BuildOptions& opts) {
    return build(ds, ps, backend, aug, opts, Task::Itr);
}

ScoreMatrix build_matrix(const DatasetManifest& ds, const PromptSet& ps,
                         const ScoreBackend& backend, const AugmentConfig& aug,
                         const BuildOptions& opts) {
    return build(ds, ps, backend, aug, opts, ps.task);
}

// ---------------------------------------------------------------------------

CachedBackend::CachedBackend(ScoreMatrix matrix) : matrix_(std::move(matrix)) {
    require_valid(validate_matrix(matrix_), "score matrix");
    for (std::size_t j = 0; j < matrix_.images.size(); ++j) image_index_[matrix_.images[j].id] = j;
    for (std::size_t i = 0; i < matrix_.prompt_ids.size(); ++i) prompt_index_[matrix_.prompt_ids[i]] = i;
}

std::unique_ptr<CachedBackend> CachedBackend::from_file(const std::filesystem::path& path) {
    return std::make_unique<CachedBackend>(load_matrix(path));
}

const Cell& CachedBackend::lookup(const VariantRef& v, const Prompt& p) const {
    auto img = image_index_.find(std::string(v.image_id));
    auto pr = prompt_index_.find(p.id);
    if (img == image_index_.end() || pr == prompt_index_.end() ||
        v.variant >= static_cast<std::size_t>(matrix_.n_rand)) {
        throw UnknownKeyError("no cached score for (image \"" + std::string(v.image_id) +
                              "\", prompt \"" + p.id + "\", variant " +
                              std::to_string(v.variant) + ")");
    }
    return matrix_.images[img->second].cells[pr->second];
}

std::vector<std::string> CachedBackend::answer_vqa(const VariantRef& v,
                                                   std::span<const Prompt> prompts) const {
    if (matrix_.task != Task::Vqa) throw BackendError("cached matrix holds ITR scores");
    std::vector<std::string> out;
    out.reserve(prompts.size());
    const int k = static_cast<int>(v.variant);
    for (const auto& p : prompts) {
        const auto& cell = std::get<VqaCell>(lookup(v, p));
        if (k < cell.yes + cell.no) {
            const bool votes_positive = k < cell.yes;
            out.push_back(votes_positive == (p.polarity == Sign::Positive) ? "yes" : "no");
        } else {
            out.push_back("unanswerable");
        }
    }
    return out;
}

std::vector<double> CachedBackend::score_itr(const VariantRef& v,
                                             std::span<const Prompt> prompts) const {
    if (matrix_.task != Task::Itr) throw BackendError("cached matrix holds VQA scores");
    std::vector<double> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) out.push_back(std::get<ItrCell>(lookup(v, p)).sims[v.variant]);
    return out;
}

std::unique_ptr<ScoreBackend> make_backend(const std::string& spec) {
    constexpr std::string_view kCached = "cached:";
    if (spec.starts_with(kCached)) return CachedBackend::from_file(spec.substr(kCached.size()));
    if (spec.starts_with("http://") || spec.starts_with("https://"))
        return std::make_unique<HttpBackend>(spec);
    throw ParseError("backend must be \"cached:<path>\" or an http URL, got \"" + spec + "\"");
}

}  // namespace promptweight
