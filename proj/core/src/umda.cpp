#include "forge/umda.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <numeric>

namespace forge {

std::vector<EnsembleMask> sample_population(const ProbabilityVector& pv, std::size_t lambda,
                                            Rng& rng) {
  std::vector<EnsembleMask> population;
  population.reserve(lambda);
  for (std::size_t i = 0; i < lambda; ++i) {
    EnsembleMask individual(pv.p.size());
    for (std::size_t bit = 0; bit < pv.p.size(); ++bit) {
      std::bernoulli_distribution coin(pv.p[bit]);
      individual.bits[bit] = coin(rng) ? 1 : 0;
    }
    population.push_back(std::move(individual));
  }
  return population;
}

std::vector<EnsembleMask> select_top(const std::vector<EnsembleMask>& population,
                                     const std::vector<double>& fitnesses, std::size_t mu) {
  if (population.size() != fitnesses.size()) {
    throw LengthMismatch("population size " + std::to_string(population.size()) +
                         " != fitness count " + std::to_string(fitnesses.size()));
  }
  if (mu > population.size()) {
    throw LengthMismatch("mu " + std::to_string(mu) + " > population size " +
                         std::to_string(population.size()));
  }
  std::vector<std::size_t> order(population.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
    return fitnesses[lhs] > fitnesses[rhs];
  });
  std::vector<EnsembleMask> selected;
  selected.reserve(mu);
  for (std::size_t i = 0; i < mu; ++i) selected.push_back(population[order[i]]);
  return selected;
}

ProbabilityVector update_model(const std::vector<EnsembleMask>& selected, std::size_t n,
                               bool clamp) {
  if (selected.empty()) throw EmptySelection("model update needs at least one individual");
  for (const auto& mask : selected) {
    if (mask.size() != n) {
      throw LengthMismatch("individual length " + std::to_string(mask.size()) + " != n " +
                           std::to_string(n));
    }
  }
  ProbabilityVector pv;
  pv.p.assign(n, 0.0);
  for (const auto& mask : selected) {
    for (std::size_t bit = 0; bit < n; ++bit) pv.p[bit] += mask.bits[bit];
  }
  const double count = static_cast<double>(selected.size());
  const double lo = 1.0 / static_cast<double>(n);
  const double hi = 1.0 - lo;
  for (double& value : pv.p) {
    value /= count;
    if (clamp) value = std::clamp(value, lo, hi);
  }
  return pv;
}

RunTrace run_umda(const UmdaConfig& config, const FitnessFn& fitness) {
  if (config.n < 1) throw InvalidConfig("n must be >= 1");
  if (config.mu < 1 || config.mu > config.lambda) {
    throw InvalidConfig("need 1 <= mu <= lambda");
  }
  if (config.generations < 1) throw InvalidConfig("generations must be >= 1");

  Rng rng(config.seed);
  ProbabilityVector pv;
  pv.p.assign(config.n, 0.5);

  RunTrace trace;
  trace.best_fitness = -std::numeric_limits<double>::infinity();

  for (int gen = 0; gen < config.generations; ++gen) {
    const std::vector<EnsembleMask> population = sample_population(pv, config.lambda, rng);

    std::vector<double> fitnesses(population.size());
    for (std::size_t i = 0; i < population.size(); ++i) {
      try {
        fitnesses[i] = fitness(population[i]);
      } catch (const std::exception& e) {
        throw FitnessFailure("fitness evaluation failed at generation " + std::to_string(gen) +
                                 ", individual " + std::to_string(i) + ": " + e.what(),
                             std::move(trace));
      }
    }

    std::size_t gen_best = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < fitnesses.size(); ++i) {
      sum += fitnesses[i];
      if (fitnesses[i] > fitnesses[gen_best]) gen_best = i;
    }
    if (fitnesses[gen_best] > trace.best_fitness) {
      trace.best_fitness = fitnesses[gen_best];
      trace.best_mask = population[gen_best];
    }

    const std::vector<EnsembleMask> selected = select_top(population, fitnesses, config.mu);
    pv = update_model(selected, config.n, config.clamp);
    pv.generation = gen + 1;

    GenerationRecord record;
    record.best_fitness = fitnesses[gen_best];
    record.mean_fitness = sum / static_cast<double>(fitnesses.size());
    record.marginals = pv.p;
    record.best_mask = population[gen_best];
    trace.generations.push_back(std::move(record));
  }
  return trace;
}

FitnessFn ensemble_fitness(const PredictionTable& validation) {
  auto table = std::make_shared<const PredictionTable>(validation);
  return [table](const EnsembleMask& mask) -> double {
    if (!mask.any()) return 0.0;
    return ensemble_accuracy(*table, mask);
  };
}

}  // namespace forge
