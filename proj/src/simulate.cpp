#include "sentrec/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sentrec/errors.hpp"
#include "sentrec/rng.hpp"
#include "sentrec/templates.hpp"

namespace sentrec::simulate {

void NoiseGrid::validate() const {
  if (sigmas.empty()) throw ConfigError("noise grid: at least one sigma required");
  if (max_rating < 1) throw ConfigError("noise grid: max_rating must be >= 1");
  for (size_t i = 0; i < sigmas.size(); ++i) {
    if (sigmas[i] < 0.0) throw ConfigError("noise grid: sigma values must be >= 0");
    if (i > 0 && sigmas[i] <= sigmas[i - 1])
      throw ConfigError("noise grid: sigma values must be distinct and ascending");
  }
}

std::vector<double> perturb_ratings(const std::vector<double>& ratings, double sigma,
                                    uint64_t seed, int max_rating) {
  if (sigma < 0.0) throw ConfigError("perturb_ratings: sigma must be >= 0");
  if (max_rating < 1) throw ConfigError("perturb_ratings: max_rating must be >= 1");
  if (sigma == 0.0) return ratings;
  std::vector<double> out;
  out.reserve(ratings.size());
  Rng rng(seed);
  for (double r : ratings) {
    const double noisy = r + sigma * rng.next_gaussian();
    out.push_back(std::clamp(noisy, 1.0, static_cast<double>(max_rating)));
  }
  return out;
}

SweepResult noise_sweep(const model::Model& m, const std::vector<ExplanationRecord>& test_split,
                        const NoiseGrid& grid, const metrics::EvaluateConfig& evaluator) {
  grid.validate();
  if (m.cfg.rating_mode != model::RatingMode::CEmb &&
      m.cfg.rating_mode != model::RatingMode::DEmb) {
    throw ConfigError("noise_sweep: model must inject the rating (c-emb or d-emb)");
  }
  if (test_split.empty()) throw ConfigError("noise_sweep: empty test split");

  std::vector<double> truth_ratings;
  truth_ratings.reserve(test_split.size());
  for (const ExplanationRecord& r : test_split) truth_ratings.push_back(r.rating);

  SweepResult result;
  for (size_t idx = 0; idx < grid.sigmas.size(); ++idx) {
    const double sigma = grid.sigmas[idx];
    const uint64_t point_seed = grid.seed ^ static_cast<uint64_t>(idx);
    const std::vector<double> noisy =
        perturb_ratings(truth_ratings, sigma, point_seed, grid.max_rating);

    std::vector<Prediction> predictions;
    predictions.reserve(test_split.size());
    for (size_t j = 0; j < test_split.size(); ++j) {
      const ExplanationRecord& rec = test_split[j];
      Prediction p;
      p.user_id = rec.user_id;
      p.item_id = rec.item_id;
      p.has_rating = true;
      p.predicted_rating = noisy[j];
      p.explanation = model::generate_explanation(m, rec.user_id, rec.item_id, noisy[j]);
      p.features = templates::parse_explanation(p.explanation);
      predictions.push_back(std::move(p));
    }

    SweepEntry entry;
    entry.sigma = sigma;
    entry.report = metrics::evaluate(test_split, predictions, evaluator);
    entry.induced_rating_mae = metrics::mae_rmse(truth_ratings, noisy).mae;
    result.entries.push_back(std::move(entry));
  }
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = "sigma,sentiment,content_p,content_n,B1,R1,induced_rating_MAE\n";
  char buf[256];
  for (const SweepEntry& e : result.entries) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", e.sigma,
                  e.report.sentiment, e.report.content_p, e.report.content_n, e.report.bleu1,
                  e.report.rouge1, e.induced_rating_mae);
    out += buf;
  }
  return out;
}

}  // namespace sentrec::simulate
