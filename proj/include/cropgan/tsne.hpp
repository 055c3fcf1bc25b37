#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cropgan {

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_until = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  std::uint64_t seed = 0;
};

// Symmetrized joint affinities with per-point Gaussian bandwidths found by
// binary search on the conditional perplexity.
struct Affinities {
  int n = 0;
  std::vector<double> joint;        // n*n, symmetric, sums to 1
  std::vector<double> conditional;  // n*n, each row sums to 1
  double max_perplexity_error = 0.0;
};

Affinities tsne_affinities(const std::vector<double>& points, int n, int dim, double perplexity);

struct TsneResult {
  std::vector<double> embedding;  // n*2 row-major
  double initial_kl = 0.0;
  double final_kl = 0.0;
  double max_perplexity_error = 0.0;
};

// Exact O(n^2) t-SNE to two dimensions.
TsneResult tsne(const std::vector<double>& points, int n, int dim, const TsneConfig& config);

// Deterministic subsample of [0,n) without replacement, order preserving,
// used to cap embedding inputs.
std::vector<int> subsample_indices(int n, int cap, std::uint64_t seed);

// Embedded points annotated for export; written as "x,y,domain,class" CSV.
struct Embedding2D {
  std::vector<double> xy;  // n*2
  std::vector<std::string> domains;
  std::vector<int> classes;  // -1 when unlabeled
};

void write_embedding_csv(const std::string& path, const Embedding2D& emb);

}  // namespace cropgan
