#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "forge/fusion.hpp"
#include "forge/prediction_table.hpp"

namespace forge {

// Per-bit marginal model p_t. With clamping on, every component stays inside
// [1/n, 1-1/n] after updates so no bit value ever becomes unsampleable.
struct ProbabilityVector {
  std::vector<double> p;
  int generation = 0;
};

struct UmdaConfig {
  std::size_t n = 0;            // problem size (bits per individual)
  std::size_t lambda = 40;      // population size per generation
  std::size_t mu = 10;          // survivors used for the model update
  int generations = 100;
  std::uint64_t seed = 0;
  bool clamp = true;
};

struct GenerationRecord {
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  std::vector<double> marginals;  // model state after this generation's update
  EnsembleMask best_mask;
};

struct RunTrace {
  std::vector<GenerationRecord> generations;
  EnsembleMask best_mask;       // elitist best-so-far over all sampled individuals
  double best_fitness = 0.0;
};

// Raised when the fitness function fails mid-run. Carries the generations
// completed before the failure.
class FitnessFailure : public Error {
 public:
  FitnessFailure(const std::string& what, RunTrace partial)
      : Error(what), partial_trace(std::move(partial)) {}
  RunTrace partial_trace;
};

using FitnessFn = std::function<double(const EnsembleMask&)>;
using Rng = std::mt19937_64;

// Draws lambda individuals; bit i is 1 with probability pv.p[i]. Sampling
// order is individual-major, bit-minor, so output is fixed for a fixed rng.
std::vector<EnsembleMask> sample_population(const ProbabilityVector& pv, std::size_t lambda,
                                            Rng& rng);

// The mu fittest individuals; ties resolve toward the earlier sampling index.
std::vector<EnsembleMask> select_top(const std::vector<EnsembleMask>& population,
                                     const std::vector<double>& fitnesses, std::size_t mu);

// Marginal i becomes the frequency of ones at position i among the selected,
// clamped to [1/n, 1-1/n] when clamp is set.
ProbabilityVector update_model(const std::vector<EnsembleMask>& selected, std::size_t n,
                               bool clamp = true);

// Full sample -> evaluate -> select -> update loop from the uniform model
// p_0 = (0.5, ..., 0.5). Fitness must be pure; identical (config, fitness)
// pairs produce identical traces.
RunTrace run_umda(const UmdaConfig& config, const FitnessFn& fitness);

// Fitness for ensemble selection: majority-vote accuracy on the validation
// table. The all-zeros mask maps to 0.0 instead of an error.
FitnessFn ensemble_fitness(const PredictionTable& validation);

}  // namespace forge
