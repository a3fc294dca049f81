// promptweight: weighted-prompt state recognizer toolkit.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "promptweight/augment.hpp"
#include "promptweight/errors.hpp"
#include "promptweight/model.hpp"
#include "promptweight/objective.hpp"
#include "promptweight/recognizer.hpp"
#include "promptweight/scoring.hpp"
#include "promptweight/synthbench.hpp"

namespace pw = promptweight;

namespace {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kUnknownState = 3,
    kBackendFailure = 4,
    kInvariantViolation = 5,
};

struct GlobalOptions {
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string log_level = "warn";
    int jobs = 4;
};

void print_error(const std::string& kind, const std::string& message) {
    nlohmann::json j = {{"error", kind}, {"message", message}};
    std::cerr << j.dump() << std::endl;
}

std::string creation_stamp() {
    const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
    if (!epoch || !*epoch) return {};
    const std::time_t t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string default_backend() {
    const char* env = std::getenv("PROMPTWEIGHT_BACKEND");
    return env ? env : "";
}

void write_or_print(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        pw::write_file(path, text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimize and evaluate weighted text-prompt state recognizers"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "promptweight 0.1.0");

    GlobalOptions g;
    app.add_option("--seed", g.seed, "Seed for every random stream")->each([&](const std::string&) {
        g.seed_given = true;
    });
    app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
    app.add_option("--jobs", g.jobs, "Concurrent backend requests / fitness workers")
        ->check(CLI::PositiveNumber);

    // augment
    auto* augment = app.add_subcommand("augment", "Write RGBShift variants of an image as PNG");
    std::string aug_image, aug_out;
    pw::AugmentConfig aug_cfg;
    augment->add_option("--image", aug_image, "Input PNG/PPM")->required();
    augment->add_option("--out", aug_out, "Output directory")->required();
    augment->add_option("--n", aug_cfg.n_rand, "Number of variants")->check(CLI::PositiveNumber);
    augment->add_option("--range", aug_cfg.shift_range, "Max per-channel shift")->check(CLI::Range(0.0, 1.0));

    // score
    auto* score = app.add_subcommand("score", "Build a score matrix by querying a backend");
    std::string sc_dataset, sc_prompts, sc_backend = default_backend(), sc_out;
    pw::AugmentConfig sc_aug;
    score->add_option("--dataset", sc_dataset, "Dataset manifest")->required();
    score->add_option("--prompts", sc_prompts, "Prompt-set file")->required();
    score->add_option("--backend", sc_backend, "URL or cached:<matrix> (default $PROMPTWEIGHT_BACKEND)");
    score->add_option("--out", sc_out, "Output score matrix")->required();
    score->add_option("--n", sc_aug.n_rand, "Variants per image")->check(CLI::PositiveNumber);
    score->add_option("--range", sc_aug.shift_range, "Max per-channel shift")->check(CLI::Range(0.0, 1.0));

    // optimize
    auto* optimize = app.add_subcommand("optimize", "Fit OPT weights with the genetic algorithm");
    std::string op_matrix, op_prompts, op_ga, op_out, op_history;
    double op_coeff = pw::kDefaultCoefficient;
    optimize->add_option("--matrix", op_matrix, "Training score matrix")->required();
    optimize->add_option("--prompts", op_prompts, "Prompt-set file")->required();
    optimize->add_option("--ga", op_ga, "GA config JSON (defaults when omitted)");
    optimize->add_option("--out", op_out, "Output recognizer")->required();
    optimize->add_option("--coefficient", op_coeff, "alpha (VQA) / beta (ITR)");
    optimize->add_option("--history", op_history, "Write the full GA run (with history) as JSON");

    // baseline
    auto* baseline = app.add_subcommand("baseline", "Build a ONE or ALL recognizer");
    std::string bl_matrix, bl_prompts, bl_method, bl_out;
    double bl_coeff = pw::kDefaultCoefficient;
    baseline->add_option("--matrix", bl_matrix, "Training score matrix (required for one)");
    baseline->add_option("--prompts", bl_prompts, "Prompt-set file")->required();
    baseline->add_option("--method", bl_method, "one|all")->required()->check(CLI::IsMember({"one", "all"}));
    baseline->add_option("--out", bl_out, "Output recognizer")->required();
    baseline->add_option("--coefficient", bl_coeff, "alpha (VQA) / beta (ITR)");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Replay a recognizer over a score matrix");
    std::string ev_recognizer, ev_matrix, ev_out;
    evaluate->add_option("--recognizer", ev_recognizer, "Recognizer file")->required();
    evaluate->add_option("--matrix", ev_matrix, "Score matrix")->required();
    evaluate->add_option("--out", ev_out, "Also write the report here");

    // predict
    auto* predict = app.add_subcommand("predict", "Recognize the state shown in one image");
    std::string pr_recognizer, pr_image, pr_image_id, pr_backend = default_backend();
    pw::AugmentConfig pr_aug;
    predict->add_option("--recognizer", pr_recognizer, "Recognizer file")->required();
    predict->add_option("--image", pr_image, "Image path")->required();
    predict->add_option("--image-id", pr_image_id, "Key for cached backends (default: file stem)");
    predict->add_option("--backend", pr_backend, "URL or cached:<matrix> (default $PROMPTWEIGHT_BACKEND)");
    predict->add_option("--n", pr_aug.n_rand, "Variants")->check(CLI::PositiveNumber);
    predict->add_option("--range", pr_aug.shift_range, "Max per-channel shift")->check(CLI::Range(0.0, 1.0));

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic score matrix");
    std::string sy_spec, sy_out, sy_prompts_out;
    synth->add_option("--spec", sy_spec, "Synth spec JSON")->required();
    synth->add_option("--out", sy_out, "Output score matrix")->required();
    synth->add_option("--prompts-out", sy_prompts_out, "Also write the matching prompt set");

    // compare
    auto* compare = app.add_subcommand("compare", "OPT/ONE/ALL accuracy table");
    std::vector<std::string> cm_opt, cm_eval, cm_prompts, cm_names, cm_synth;
    std::string cm_ga, cm_csv;
    double cm_coeff = pw::kDefaultCoefficient;
    compare->add_option("--opt-matrix", cm_opt, "D_opt matrix (repeat per state)");
    compare->add_option("--eval-matrix", cm_eval, "D_eval matrix (repeat per state)");
    compare->add_option("--prompts", cm_prompts, "Prompt set (one, or one per state)");
    compare->add_option("--name", cm_names, "State name (repeat per state)");
    compare->add_option("--synth", cm_synth, "Synth spec; D_opt and a re-seeded D_eval are generated");
    compare->add_option("--ga", cm_ga, "GA config JSON");
    compare->add_option("--coefficient", cm_coeff, "alpha (VQA) / beta (ITR)");
    compare->add_option("--csv", cm_csv, "Also write the table as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return kUsage;
    }

    auto logger = spdlog::stderr_color_mt("promptweight");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(g.log_level));

    auto ga_config = [&](const std::string& path) {
        pw::GAConfig cfg = path.empty() ? pw::GAConfig{} : pw::load_ga_config(path);
        if (g.seed_given) cfg.rng_seed = g.seed;
        return cfg;
    };

    try {
        if (*augment) {
            aug_cfg.rng_seed = g.seed;
            const auto img = pw::load_image(aug_image);
            const auto variants = pw::make_variants(img, aug_cfg);
            const std::string stem = std::filesystem::path(aug_image).stem().string();
            for (std::size_t k = 0; k < variants.size(); ++k) {
                char name[64];
                std::snprintf(name, sizeof name, "_v%02zu.png", k);
                pw::save_png(std::filesystem::path(aug_out) / (stem + name), variants[k]);
            }
            spdlog::info("wrote {} variants to {}", variants.size(), aug_out);
        } else if (*score) {
            if (sc_backend.empty()) throw CLI::RequiredError("--backend");
            sc_aug.rng_seed = g.seed;
            const auto ds = pw::load_manifest(sc_dataset);
            const auto ps = pw::load_prompt_set(sc_prompts);
            const auto backend = pw::make_backend(sc_backend);
            pw::BuildOptions opts{g.jobs, std::filesystem::path(sc_dataset).parent_path()};
            const auto m = pw::build_matrix(ds, ps, *backend, sc_aug, opts);
            pw::save(sc_out, m);
            spdlog::info("scored {} images x {} prompts with {}", m.n_images(), m.n_prompts(),
                         backend->identifier());
        } else if (*optimize) {
            const auto m = pw::load_matrix(op_matrix);
            const auto ps = pw::load_prompt_set(op_prompts);
            const auto cfg = ga_config(op_ga);
            std::cout << "population=" << cfg.population << " generations=" << cfg.generations
                      << " seed=" << cfg.rng_seed << "\n";
            const auto fit = pw::fit_opt(m, ps, cfg, op_coeff, {g.jobs}, creation_stamp());
            const auto& hist = fit.run.history;
            const std::size_t step = std::max<std::size_t>(1, hist.size() / 10);
            for (std::size_t i = 0; i < hist.size(); i += step)
                std::cout << "gen " << hist[i].generation << " best=" << hist[i].best
                          << " mean=" << hist[i].mean << "\n";
            std::cout << "final best E=" << fit.run.best_fitness << " evaluations="
                      << fit.run.evaluations << " elapsed=" << fit.run.elapsed_seconds << "s\n";
            pw::save(op_out, fit.recognizer);
            if (!op_history.empty()) pw::write_file(op_history, pw::serialize(fit.run));
        } else if (*baseline) {
            const auto ps = pw::load_prompt_set(bl_prompts);
            pw::Recognizer r;
            if (bl_method == "all") {
                r = pw::make_all(ps, bl_coeff);
            } else {
                if (bl_matrix.empty()) throw CLI::RequiredError("--matrix");
                r = pw::fit_one(pw::load_matrix(bl_matrix), ps, bl_coeff);
            }
            r.provenance.created = creation_stamp();
            pw::save(bl_out, r);
        } else if (*evaluate) {
            const auto r = pw::load_recognizer(ev_recognizer);
            const auto m = pw::load_matrix(ev_matrix);
            const std::string report = pw::serialize(pw::evaluate(r, m));
            std::cout << report;
            if (!ev_out.empty()) pw::write_file(ev_out, report);
        } else if (*predict) {
            if (pr_backend.empty()) throw CLI::RequiredError("--backend");
            pr_aug.rng_seed = g.seed;
            const auto r = pw::load_recognizer(pr_recognizer);
            const auto backend = pw::make_backend(pr_backend);
            std::optional<pw::RgbImage> img;
            if (backend->needs_pixels()) img = pw::load_image(pr_image);
            const std::string id =
                pr_image_id.empty() ? std::filesystem::path(pr_image).stem().string() : pr_image_id;
            const auto p = pw::predict(r, img ? &*img : nullptr, id, *backend, pr_aug);
            std::cout << pw::serialize(p);
            if (p.state == pw::State::Unknown) return kUnknownState;
        } else if (*synth) {
            auto spec = pw::load_synth_spec(sy_spec);
            if (g.seed_given) spec.rng_seed = g.seed;
            const auto out = pw::generate(spec);
            pw::save(sy_out, out.matrix);
            if (!sy_prompts_out.empty()) pw::save(sy_prompts_out, out.prompts);
        } else if (*compare) {
            const auto cfg = ga_config(cm_ga);
            pw::ComparisonTable table;
            for (std::size_t s = 0; s < cm_synth.size(); ++s) {
                auto spec = pw::load_synth_spec(cm_synth[s]);
                if (g.seed_given) spec.rng_seed = pw::mix_seed(g.seed, s);
                const auto train = pw::generate(spec);
                const auto held = pw::generate(pw::held_out(spec));
                table.states.push_back(pw::run_comparison(spec.name, train.matrix, held.matrix,
                                                          train.prompts, cfg, cm_coeff, {g.jobs}));
            }
            if (cm_opt.size() != cm_eval.size())
                throw CLI::ValidationError("--opt-matrix and --eval-matrix must be given the same number of times");
            if (!cm_opt.empty() && cm_prompts.size() != 1 && cm_prompts.size() != cm_opt.size())
                throw CLI::ValidationError("--prompts must be given once or once per state");
            for (std::size_t s = 0; s < cm_opt.size(); ++s) {
                const auto ps = pw::load_prompt_set(cm_prompts.size() == 1 ? cm_prompts[0] : cm_prompts[s]);
                const std::string name = s < cm_names.size() ? cm_names[s] : "state" + std::to_string(s + 1);
                table.states.push_back(pw::run_comparison(name, pw::load_matrix(cm_opt[s]),
                                                          pw::load_matrix(cm_eval[s]), ps, cfg,
                                                          cm_coeff, {g.jobs}));
            }
            if (table.states.empty()) throw CLI::ValidationError("nothing to compare");
            std::cout << pw::render_text(table);
            if (!cm_csv.empty()) pw::write_file(cm_csv, pw::render_csv(table));
        }
    } catch (const CLI::Error& e) {
        print_error("usage", e.what());
        return kUsage;
    } catch (const pw::BackendError& e) {
        print_error(e.kind(), e.what());
        return kBackendFailure;
    } catch (const pw::InvariantError& e) {
        print_error(e.kind(), e.what());
        return kInvariantViolation;
    } catch (const pw::Error& e) {
        print_error(e.kind(), e.what());
        return kFailure;
    } catch (const std::exception& e) {
        print_error("error", e.what());
        return kFailure;
    }
    return kOk;
}
