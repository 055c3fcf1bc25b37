#include "cropgan/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cropgan/errors.hpp"
#include "cropgan/rng.hpp"

namespace cropgan {

namespace {

std::vector<double> squared_distances(const std::vector<double>& x, int n, int dim) {
  std::vector<double> d2(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double acc = 0.0;
      const double* xi = &x[static_cast<std::size_t>(i) * dim];
      const double* xj = &x[static_cast<std::size_t>(j) * dim];
      for (int k = 0; k < dim; ++k) {
        const double dv = xi[k] - xj[k];
        acc += dv * dv;
      }
      d2[static_cast<std::size_t>(i) * n + j] = acc;
      d2[static_cast<std::size_t>(j) * n + i] = acc;
    }
  }
  return d2;
}

// Row entropy (nats) and conditional probabilities for one bandwidth.
double fill_row(const std::vector<double>& d2, int n, int i, double beta, double* row) {
  const double* di = &d2[static_cast<std::size_t>(i) * n];
  double zmax = -1e300;
  for (int j = 0; j < n; ++j) {
    if (j != i) zmax = std::max(zmax, -beta * di[j]);
  }
  double z = 0.0, weighted = 0.0;
  for (int j = 0; j < n; ++j) {
    if (j == i) {
      row[j] = 0.0;
      continue;
    }
    const double e = std::exp(-beta * di[j] - zmax);
    row[j] = e;
    z += e;
    weighted += di[j] * e;
  }
  const double inv_z = 1.0 / z;
  for (int j = 0; j < n; ++j) row[j] *= inv_z;
  // H = log z + zmax + beta * E[d]
  return std::log(z) + zmax + beta * weighted * inv_z;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q, int n) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / std::max(q[i], 1e-12));
  }
  (void)n;
  return kl;
}

}  // namespace

Affinities tsne_affinities(const std::vector<double>& points, int n, int dim, double perplexity) {
  if (n < 4) throw UsageError("t-SNE needs at least 4 points");
  if (!(perplexity > 0.0) || perplexity >= (n - 1) / 3.0) {
    throw UsageError("perplexity must be positive and below (n-1)/3");
  }
  if (points.size() != static_cast<std::size_t>(n) * dim) {
    throw UsageError("t-SNE input size does not match n*dim");
  }
  for (double v : points) {
    if (!std::isfinite(v)) throw UsageError("t-SNE input contains non-finite values");
  }

  const std::vector<double> d2 = squared_distances(points, n, dim);
  const double target_h = std::log(perplexity);

  Affinities out;
  out.n = n;
  out.conditional.assign(static_cast<std::size_t>(n) * n, 0.0);
  out.joint.assign(static_cast<std::size_t>(n) * n, 0.0);

  for (int i = 0; i < n; ++i) {
    double beta = 1.0, beta_lo = 0.0, beta_hi = 1e308;
    bool has_lo = false, has_hi = false;
    double* row = &out.conditional[static_cast<std::size_t>(i) * n];
    double h = fill_row(d2, n, i, beta, row);
    for (int iter = 0; iter < 200 && std::fabs(std::exp(h) - perplexity) > 1e-5; ++iter) {
      if (h > target_h) {  // too spread out, sharpen
        beta_lo = beta;
        has_lo = true;
        beta = has_hi ? 0.5 * (beta_lo + beta_hi) : beta * 2.0;
      } else {
        beta_hi = beta;
        has_hi = true;
        beta = has_lo ? 0.5 * (beta_lo + beta_hi) : beta * 0.5;
      }
      h = fill_row(d2, n, i, beta, row);
    }
    out.max_perplexity_error =
        std::max(out.max_perplexity_error, std::fabs(std::exp(h) - perplexity));
  }

  const double inv_2n = 1.0 / (2.0 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      out.joint[static_cast<std::size_t>(i) * n + j] =
          (out.conditional[static_cast<std::size_t>(i) * n + j] +
           out.conditional[static_cast<std::size_t>(j) * n + i]) *
          inv_2n;
    }
  }
  return out;
}

TsneResult tsne(const std::vector<double>& points, int n, int dim, const TsneConfig& config) {
  Affinities aff = tsne_affinities(points, n, dim, config.perplexity);

  TsneResult res;
  res.max_perplexity_error = aff.max_perplexity_error;

  Rng rng(config.seed);
  std::vector<double> y(static_cast<std::size_t>(n) * 2);
  for (double& v : y) v = rng.normal(0.0, 1e-4);

  std::vector<double> vel(y.size(), 0.0);
  std::vector<double> gains(y.size(), 1.0);
  std::vector<double> grad(y.size(), 0.0);
  std::vector<double> num(static_cast<std::size_t>(n) * n, 0.0);

  const auto compute_q = [&](double& z_out) {
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
      num[static_cast<std::size_t>(i) * n + i] = 0.0;
      for (int j = i + 1; j < n; ++j) {
        const double dx = y[static_cast<std::size_t>(i) * 2] - y[static_cast<std::size_t>(j) * 2];
        const double dy = y[static_cast<std::size_t>(i) * 2 + 1] - y[static_cast<std::size_t>(j) * 2 + 1];
        const double v = 1.0 / (1.0 + dx * dx + dy * dy);
        num[static_cast<std::size_t>(i) * n + j] = v;
        num[static_cast<std::size_t>(j) * n + i] = v;
        z += 2.0 * v;
      }
    }
    z_out = z;
  };

  const auto kl_now = [&]() {
    double z;
    compute_q(z);
    double kl = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double p = aff.joint[static_cast<std::size_t>(i) * n + j];
        if (p > 0.0) {
          const double q = std::max(num[static_cast<std::size_t>(i) * n + j] / z, 1e-12);
          kl += p * std::log(p / q);
        }
      }
    }
    return kl;
  };

  res.initial_kl = kl_now();

  std::vector<double> p = aff.joint;
  for (double& v : p) v *= config.early_exaggeration;
  bool exaggerated = true;

  for (int iter = 0; iter < config.iterations; ++iter) {
    if (exaggerated && iter >= config.exaggeration_until) {
      for (double& v : p) v /= config.early_exaggeration;
      exaggerated = false;
    }
    double z;
    compute_q(z);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      const double yi0 = y[static_cast<std::size_t>(i) * 2];
      const double yi1 = y[static_cast<std::size_t>(i) * 2 + 1];
      double g0 = 0.0, g1 = 0.0;
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double nv = num[static_cast<std::size_t>(i) * n + j];
        const double pq = p[static_cast<std::size_t>(i) * n + j] - nv / z;
        const double w = 4.0 * pq * nv;
        g0 += w * (yi0 - y[static_cast<std::size_t>(j) * 2]);
        g1 += w * (yi1 - y[static_cast<std::size_t>(j) * 2 + 1]);
      }
      grad[static_cast<std::size_t>(i) * 2] = g0;
      grad[static_cast<std::size_t>(i) * 2 + 1] = g1;
    }

    const double momentum =
        iter < config.momentum_switch ? config.initial_momentum : config.final_momentum;
    for (std::size_t k = 0; k < y.size(); ++k) {
      const bool same_sign = (grad[k] > 0.0) == (vel[k] > 0.0);
      gains[k] = same_sign ? std::max(gains[k] * 0.8, 0.01) : gains[k] + 0.2;
      vel[k] = momentum * vel[k] - config.learning_rate * gains[k] * grad[k];
      y[k] += vel[k];
    }
    double mean0 = 0.0, mean1 = 0.0;
    for (int i = 0; i < n; ++i) {
      mean0 += y[static_cast<std::size_t>(i) * 2];
      mean1 += y[static_cast<std::size_t>(i) * 2 + 1];
    }
    mean0 /= n;
    mean1 /= n;
    for (int i = 0; i < n; ++i) {
      y[static_cast<std::size_t>(i) * 2] -= mean0;
      y[static_cast<std::size_t>(i) * 2 + 1] -= mean1;
    }
  }

  res.embedding = std::move(y);
  // recompute KL on the final layout with the true affinities
  {
    std::vector<double>& yy = res.embedding;
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
      num[static_cast<std::size_t>(i) * n + i] = 0.0;
      for (int j = i + 1; j < n; ++j) {
        const double dx = yy[static_cast<std::size_t>(i) * 2] - yy[static_cast<std::size_t>(j) * 2];
        const double dy =
            yy[static_cast<std::size_t>(i) * 2 + 1] - yy[static_cast<std::size_t>(j) * 2 + 1];
        const double v = 1.0 / (1.0 + dx * dx + dy * dy);
        num[static_cast<std::size_t>(i) * n + j] = v;
        num[static_cast<std::size_t>(j) * n + i] = v;
        z += 2.0 * v;
      }
    }
    double kl = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double pv = aff.joint[static_cast<std::size_t>(i) * n + j];
        if (pv > 0.0) {
          const double q = std::max(num[static_cast<std::size_t>(i) * n + j] / z, 1e-12);
          kl += pv * std::log(pv / q);
        }
      }
    }
    res.final_kl = kl;
  }
  return res;
}

std::vector<int> subsample_indices(int n, int cap, std::uint64_t seed) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  if (n <= cap) return idx;
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(static_cast<std::size_t>(cap));
  std::sort(idx.begin(), idx.end());
  return idx;
}

void write_embedding_csv(const std::string& path, const Embedding2D& emb) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path);
  out << "x,y,domain,class\n";
  char buf[128];
  for (std::size_t i = 0; i < emb.domains.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", emb.xy[i * 2], emb.xy[i * 2 + 1]);
    out << buf << "," << emb.domains[i] << "," << emb.classes[i] << "\n";
  }
}

}  // namespace cropgan
