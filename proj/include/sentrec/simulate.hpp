#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sentrec/metrics.hpp"
#include "sentrec/model.hpp"
#include "sentrec/types.hpp"

namespace sentrec::simulate {

struct NoiseGrid {
  std::vector<double> sigmas = {0.0, 0.25, 0.5, 1.0, 2.0};
  uint64_t seed = 0;
  int max_rating = 5;
  void validate() const;  // sigmas non-empty, >= 0, distinct, ascending
};

// r' = clamp(r + eps, 1, max_rating) with eps ~ Normal(0, sigma^2) from a
// generator seeded with `seed`. sigma = 0 copies the input exactly (no draws).
std::vector<double> perturb_ratings(const std::vector<double>& ratings, double sigma,
                                    uint64_t seed, int max_rating);

struct SweepEntry {
  double sigma = 0.0;
  metrics::MetricReport report;
  double induced_rating_mae = 0.0;  // MAE between perturbed and original ratings
};

struct SweepResult {
  std::vector<SweepEntry> entries;  // one per sigma, grid order
};

// For each sigma: perturb the ground-truth test ratings (derived seed =
// grid.seed XOR index, so points are order- and parallelism-independent),
// feed them to the rating-conditioned generator, extract features from the
// generated text, and evaluate against the ground truth. The sigma = 0 entry
// is bit-identical to evaluating the unperturbed pipeline.
SweepResult noise_sweep(const model::Model& m, const std::vector<ExplanationRecord>& test_split,
                        const NoiseGrid& grid, const metrics::EvaluateConfig& evaluator);

// CSV with header sigma,sentiment,content_p,content_n,B1,R1,induced_rating_MAE.
std::string sweep_csv(const SweepResult& result);

}  // namespace sentrec::simulate
