#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "promptweight/rng.hpp"
#include "promptweight/types.hpp"

namespace promptweight {

using Genome = std::vector<double>;
using FitnessFn = std::function<double(std::span<const double>)>;

struct GenerationStats {
    int generation = 0;
    double best = 0.0;  // hall-of-fame fitness after this generation
    double mean = 0.0;  // population mean
};

struct GARunResult {
    Genome best_weights;
    double best_fitness = 0.0;
    std::vector<GenerationStats> history;  // generations + 1 entries
    long long evaluations = 0;
    GAConfig config;
    double elapsed_seconds = 0.0;
};

/// Blend crossover: each child gene is drawn from
/// U[min - alpha*d, max + alpha*d] with d = |p1_i - p2_i|, then clamped to [0, 1].
std::pair<Genome, Genome> blend_crossover(std::span<const double> p1, std::span<const double> p2,
                                          double blend_alpha, Rng& rng);

/// Adds N(0, sigma^2) to each gene with probability gene_prob, then clamps.
Genome gaussian_mutate(std::span<const double> ind, double sigma, double gene_prob, Rng& rng);

/// Draws k indices uniformly with replacement and returns the fittest one
/// (lowest index on ties).
std::size_t tournament_select(std::span<const double> fitnesses, int k, Rng& rng);

struct GAOptions {
    int jobs = 1;  // fitness evaluation workers; results do not depend on it
};

/// Generational GA maximizing `fitness` over [0, 1]^n_genes. When
/// cfg.seed_population is set, `seeds` overwrite the first individuals of the
/// initial population. The best individual ever evaluated is returned.
GARunResult run_ga(const FitnessFn& fitness, std::size_t n_genes, const GAConfig& cfg,
                   std::span<const Genome> seeds = {}, const GAOptions& opts = {});

struct BinaryOptimum {
    Genome weights;
    double fitness = 0.0;
};

inline constexpr std::size_t kMaxBruteForceGenes = 20;

/// Exact maximum over {0,1}^n minus the zero vector. Ties go to the lowest
/// binary value with gene 0 as the least significant bit.
BinaryOptimum brute_force_binary(const FitnessFn& fitness, std::size_t n_genes);

std::string serialize(const GARunResult& result);

}  // namespace promptweight
