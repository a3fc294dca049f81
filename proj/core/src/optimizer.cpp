#include "promptweight/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>

#include "json.hpp"
#include "promptweight/errors.hpp"
#include "promptweight/model.hpp"
#include "promptweight/numeric.hpp"
#include "promptweight/parallel.hpp"

namespace promptweight {

std::pair<Genome, Genome> blend_crossover(std::span<const double> p1, std::span<const double> p2,
                                          double blend_alpha, Rng& rng) {
    if (p1.size() != p2.size()) throw MismatchError("crossover parents differ in length");
    Genome c1(p1.size()), c2(p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        const double lo = std::min(p1[i], p2[i]);
        const double hi = std::max(p1[i], p2[i]);
        const double d = hi - lo;
        if (d == 0.0) {
            c1[i] = c2[i] = p1[i];
            continue;
        }
        const double a = lo - blend_alpha * d;
        const double b = hi + blend_alpha * d;
        c1[i] = std::clamp(rng.uniform(a, b), 0.0, 1.0);
        c2[i] = std::clamp(rng.uniform(a, b), 0.0, 1.0);
    }
    return {std::move(c1), std::move(c2)};
}

Genome gaussian_mutate(std::span<const double> ind, double sigma, double gene_prob, Rng& rng) {
    Genome out(ind.begin(), ind.end());
    for (auto& g : out)
        if (rng.bernoulli(gene_prob)) g = std::clamp(g + rng.normal(0.0, sigma), 0.0, 1.0);
    return out;
}

std::size_t tournament_select(std::span<const double> fitnesses, int k, Rng& rng) {
    if (fitnesses.empty()) throw InvariantError("tournament over an empty population");
    if (k < 1) throw InvariantError("tournament size must be >= 1");
    std::size_t best = rng.index(fitnesses.size());
    for (int t = 1; t < k; ++t) {
        const std::size_t c = rng.index(fitnesses.size());
        if (fitnesses[c] > fitnesses[best] || (fitnesses[c] == fitnesses[best] && c < best))
            best = c;
    }
    return best;
}

namespace {

double evaluate_one(const FitnessFn& fitness, std::span<const double> ind, int generation,
                    std::size_t index) {
    try {
        return fitness(ind);
    } catch (const std::exception& e) {
        throw Error("fitness failed at generation " + std::to_string(generation) +
                    ", individual " + std::to_string(index) + ": " + e.what());
    }
}

double mean_of(const std::vector<double>& v) {
    CompensatedSum s;
    for (double x : v) s.add(x);
    return v.empty() ? 0.0 : s.value() / static_cast<double>(v.size());
}

}  // namespace

GARunResult run_ga(const FitnessFn& fitness, std::size_t n_genes, const GAConfig& cfg,
                   std::span<const Genome> seeds, const GAOptions& opts) {
    if (n_genes < 1) throw InvariantError("GA needs at least one gene");
    require_valid(validate_ga_config(cfg), "GA config");
    const auto start = std::chrono::steady_clock::now();

    Rng rng(cfg.rng_seed);
    const std::size_t n = static_cast<std::size_t>(cfg.population);
    std::vector<Genome> pop(n, Genome(n_genes));
    for (auto& ind : pop)
        for (auto& g : ind) g = rng.uniform(0.0, 1.0);
    if (cfg.seed_population) {
        for (std::size_t s = 0; s < std::min(seeds.size(), n); ++s) {
            if (seeds[s].size() != n_genes) throw MismatchError("seed individual has wrong length");
            pop[s] = seeds[s];
            for (auto& g : pop[s]) g = std::clamp(g, 0.0, 1.0);
        }
    }

    GARunResult result;
    result.config = cfg;
    std::vector<double> fit(n);

    auto evaluate = [&](const std::vector<std::size_t>& which, int generation) {
        parallel_for(which.size(), opts.jobs, [&](std::size_t k) {
            const std::size_t i = which[k];
            fit[i] = evaluate_one(fitness, pop[i], generation, i);
        });
        result.evaluations += static_cast<long long>(which.size());
    };

    auto update_hall_of_fame = [&](int generation) {
        for (std::size_t i = 0; i < n; ++i) {
            if (result.best_weights.empty() || fit[i] > result.best_fitness) {
                result.best_fitness = fit[i];
                result.best_weights = pop[i];
            }
        }
        result.history.push_back({generation, result.best_fitness, mean_of(fit)});
    };

    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    evaluate(all, 0);
    update_hall_of_fame(0);

    std::vector<Genome> offspring(n);
    std::vector<double> off_fit(n);
    std::vector<char> stale(n);
    for (int gen = 1; gen <= cfg.generations; ++gen) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t pick = tournament_select(fit, cfg.tournament_size, rng);
            offspring[i] = pop[pick];
            off_fit[i] = fit[pick];
            stale[i] = 0;
        }
        for (std::size_t i = 0; i + 1 < n; i += 2) {
            if (rng.bernoulli(cfg.crossover_prob)) {
                auto [c1, c2] = blend_crossover(offspring[i], offspring[i + 1], cfg.blend_alpha, rng);
                offspring[i] = std::move(c1);
                offspring[i + 1] = std::move(c2);
                stale[i] = stale[i + 1] = 1;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (rng.bernoulli(cfg.mutation_prob)) {
                offspring[i] = gaussian_mutate(offspring[i], cfg.mutation_sigma,
                                               cfg.mutation_gene_prob, rng);
                stale[i] = 1;
            }
        }
        std::swap(pop, offspring);
        std::swap(fit, off_fit);

        std::vector<std::size_t> changed;
        for (std::size_t i = 0; i < n; ++i)
            if (stale[i]) changed.push_back(i);
        evaluate(changed, gen);
        update_hall_of_fame(gen);
    }

    result.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

BinaryOptimum brute_force_binary(const FitnessFn& fitness, std::size_t n_genes) {
    if (n_genes < 1 || n_genes > kMaxBruteForceGenes)
        throw InvariantError("brute force supports 1.." + std::to_string(kMaxBruteForceGenes) +
                             " genes, got " + std::to_string(n_genes));
    BinaryOptimum best;
    Genome w(n_genes);
    const std::uint32_t end = 1u << n_genes;
    for (std::uint32_t mask = 1; mask < end; ++mask) {
        for (std::size_t i = 0; i < n_genes; ++i) w[i] = (mask >> i) & 1u ? 1.0 : 0.0;
        const double f = fitness(w);
        if (best.weights.empty() || f > best.fitness) {
            best.fitness = f;
            best.weights = w;
        }
    }
    return best;
}

std::string serialize(const GARunResult& r) {
    nlohmann::ordered_json o;
    o["best_weights"] = r.best_weights;
    o["best_fitness"] = r.best_fitness;
    o["evaluations"] = r.evaluations;
    o["elapsed_seconds"] = r.elapsed_seconds;
    o["config"] = nlohmann::ordered_json::parse(serialize(r.config));
    auto& hist = o["history"] = nlohmann::ordered_json::array();
    for (const auto& h : r.history)
        hist.push_back({{"gen", h.generation}, {"best", h.best}, {"mean", h.mean}});
    return o.dump(2) + "\n";
}

}  // namespace promptweight
