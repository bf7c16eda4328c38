#include "leafstress/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace leafstress {

namespace {

constexpr double kJointFloor = 1e-12;
constexpr std::size_t kMaxBracketSteps = 200;

void require_square(const Tensor64& m, const char* what) {
  if (m.rank() != 2 || m.dim(0) != m.dim(1))
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + " must be square, got " + shape_string(m.shape()));
}

// Row distribution for precision beta with the row minimum subtracted; returns
// the entropy in bits.
double row_distribution(const double* d, std::size_t n, std::size_t self, double dmin, double beta, double* out) {
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = j == self ? 0.0 : std::exp(-beta * (d[j] - dmin));
    sum += out[j];
  }
  double h = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] /= sum;
    if (out[j] > 0.0) h -= out[j] * std::log2(out[j]);
  }
  return h;
}

}  // namespace

void TsneConfig::validate(std::size_t n) const {
  if (!(perplexity > 1.0) || !(perplexity <= double(n) - 1.0))
    throw Error(ErrorKind::InvalidParameter,
                "perplexity " + std::to_string(perplexity) + " invalid for n=" + std::to_string(n));
  if (output_dim != 2) throw Error(ErrorKind::InvalidParameter, "only 2-D embeddings are supported");
  if (!(learning_rate > 0.0) || !(early_exaggeration >= 1.0) || !(min_gain > 0.0) || !(init_std > 0.0))
    throw Error(ErrorKind::InvalidParameter, "t-SNE rates must be positive");
  if (max_bisection_steps == 0 || !(entropy_tol > 0.0))
    throw Error(ErrorKind::InvalidParameter, "calibration tolerance and step budget must be positive");
}

Tensor64 squared_distances(const Tensor64& x) {
  if (x.rank() != 2) throw Error(ErrorKind::ShapeMismatch, "features must be [n, F]");
  const std::size_t n = x.dim(0), f = x.dim(1);
  Tensor64 d({n, n});
  const double* p = x.data().data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < f; ++k) {
        const double diff = p[i * f + k] - p[j * f + k];
        s += diff * diff;
      }
      d.at(i, j) = d.at(j, i) = s;
    }
  return d;
}

ConditionalAffinities calibrate_perplexity(const Tensor64& sq_dist, double perplexity, double entropy_tol,
                                           std::size_t max_bisection_steps) {
  require_square(sq_dist, "distance matrix");
  const std::size_t n = sq_dist.dim(0);
  if (n < 2 || !(perplexity > 1.0) || !(perplexity <= double(n) - 1.0))
    throw Error(ErrorKind::InvalidParameter,
                "perplexity " + std::to_string(perplexity) + " invalid for n=" + std::to_string(n));
  const double target = std::log2(perplexity);
  ConditionalAffinities out{Tensor64({n, n}), std::vector<double>(n), std::vector<double>(n), {}};
  std::vector<double> row(n), best(n);

  for (std::size_t i = 0; i < n; ++i) {
    const double* d = sq_dist.data().data() + i * n;
    double dmin = std::numeric_limits<double>::infinity(), dsum = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) {
        dmin = std::min(dmin, d[j]);
        dsum += d[j];
      }
    const double spread = dsum / double(n - 1) - dmin;
    double beta = spread > 0.0 ? 1.0 / spread : 1.0;
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double best_err = std::numeric_limits<double>::infinity(), best_beta = beta, best_h = 0.0;

    auto evaluate = [&](double b) {
      const double h = row_distribution(d, n, i, dmin, b, row.data());
      const double err = std::abs(std::exp2(h) - perplexity);
      if (err < best_err) {
        best_err = err;
        best_beta = b;
        best_h = h;
        best = row;
      }
      return h;
    };

    double h = evaluate(beta);
    for (std::size_t step = 0; step < kMaxBracketSteps && std::abs(std::exp2(h) - perplexity) > entropy_tol; ++step) {
      if (h > target) {
        lo = beta;
        if (std::isfinite(hi)) break;
        beta *= 2.0;
      } else {
        hi = beta;
        if (lo > 0.0) break;
        beta /= 2.0;
        if (beta < 1e-300) break;
      }
      h = evaluate(beta);
    }
    for (std::size_t step = 0; step < max_bisection_steps && best_err > entropy_tol && std::isfinite(hi); ++step) {
      beta = 0.5 * (lo + hi);
      h = evaluate(beta);
      (h > target ? lo : hi) = beta;
    }
    if (best_err > entropy_tol) out.failed.push_back(i);
    std::copy(best.begin(), best.end(), out.p.data().begin() + i * n);
    out.sigma[i] = std::sqrt(1.0 / (2.0 * best_beta));
    out.perplexity[i] = std::exp2(best_h);
  }
  return out;
}

Tensor64 joint_probabilities(const Tensor64& conditional) {
  require_square(conditional, "conditional matrix");
  const std::size_t n = conditional.dim(0);
  Tensor64 p({n, n});
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::max((conditional.at(i, j) + conditional.at(j, i)) / (2.0 * double(n)), kJointFloor);
      p.at(i, j) = p.at(j, i) = v;
      total += 2.0 * v;
    }
  for (auto& v : p.data()) v /= total;
  return p;
}

namespace {

// KL of `p` against Q(y) and gradient of KL(scale·p || Q).
KlResult kl_and_gradient_scaled(const Tensor64& p, const Tensor64& y, double scale) {
  const std::size_t n = y.dim(0), dim = y.dim(1);
  const double* py = y.data().data();
  std::vector<double> num(n * n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = py[i * dim + k] - py[j * dim + k];
        d2 += diff * diff;
      }
      num[i * n + j] = num[j * n + i] = 1.0 / (1.0 + d2);
      z += 2.0 * num[i * n + j];
    }
  KlResult r{0.0, Tensor64({n, dim})};
  double* g = r.grad.data().data();
  const double* pp = p.data().data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = pp[i * n + j];
      const double qij = num[i * n + j] / z;
      if (pij > 0.0) r.kl += pij * std::log(pij / qij);
      const double m = 4.0 * (scale * pij - qij) * num[i * n + j];
      for (std::size_t k = 0; k < dim; ++k) g[i * dim + k] += m * (py[i * dim + k] - py[j * dim + k]);
    }
  return r;
}

}  // namespace

KlResult kl_and_gradient(const Tensor64& p, const Tensor64& y) {
  require_square(p, "P");
  if (y.rank() != 2 || y.dim(0) != p.dim(0)) throw Error(ErrorKind::ShapeMismatch, "embedding rows must match P");
  return kl_and_gradient_scaled(p, y, 1.0);
}

TsneResult run_tsne(const Tensor64& features, const TsneConfig& cfg, RngStream& stream) {
  if (features.rank() != 2) throw Error(ErrorKind::ShapeMismatch, "features must be [n, F]");
  const std::size_t n = features.dim(0), dim = cfg.output_dim;
  if (n < 5) throw Error(ErrorKind::InvalidParameter, "t-SNE needs at least 5 points");
  cfg.validate(n);

  const auto cond = calibrate_perplexity(squared_distances(features), cfg.perplexity, cfg.entropy_tol,
                                         cfg.max_bisection_steps);
  if (!cond.failed.empty())
    throw Error(ErrorKind::CalibrationFailed,
                std::to_string(cond.failed.size()) + " rows failed perplexity calibration (first: row " +
                    std::to_string(cond.failed.front()) + ")");
  const Tensor64 p = joint_probabilities(cond.p);

  TsneResult out{Tensor64({n, dim}), {}};
  for (auto& v : out.y.data()) v = cfg.init_std * stream.standard_normal();
  std::vector<double> update(n * dim, 0.0), gains(n * dim, 1.0);
  auto centre = [&] {
    double* y = out.y.data().data();
    for (std::size_t k = 0; k < dim; ++k) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += y[i * dim + k];
      mean /= double(n);
      for (std::size_t i = 0; i < n; ++i) y[i * dim + k] -= mean;
    }
  };
  centre();

  out.kl_trace.reserve(cfg.iterations + 1);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const double exaggeration = it < cfg.exaggeration_iters ? cfg.early_exaggeration : 1.0;
    const double momentum = it < cfg.momentum_switch_iter ? cfg.initial_momentum : cfg.final_momentum;
    const auto r = kl_and_gradient_scaled(p, out.y, exaggeration);
    out.kl_trace.push_back(r.kl);
    double* y = out.y.data().data();
    const double* g = r.grad.data().data();
    for (std::size_t k = 0; k < n * dim; ++k) {
      const bool same_sign = (g[k] > 0.0) == (update[k] > 0.0);
      gains[k] = std::max(same_sign ? gains[k] * 0.8 : gains[k] + 0.2, cfg.min_gain);
      update[k] = momentum * update[k] - cfg.learning_rate * gains[k] * g[k];
      y[k] += update[k];
    }
    centre();
  }
  out.kl_trace.push_back(kl_and_gradient_scaled(p, out.y, 1.0).kl);
  return out;
}

Tensor64 standardize_columns(const Tensor64& x) {
  if (x.rank() != 2) throw Error(ErrorKind::ShapeMismatch, "features must be [n, F]");
  const std::size_t n = x.dim(0), f = x.dim(1);
  Tensor64 out = x;
  for (std::size_t k = 0; k < f; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x.at(i, k);
    mean /= double(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x.at(i, k) - mean) * (x.at(i, k) - mean);
    const double sd = std::sqrt(var / double(n));
    for (std::size_t i = 0; i < n; ++i) out.at(i, k) = sd > 0.0 ? (x.at(i, k) - mean) / sd : 0.0;
  }
  return out;
}

double nearest_neighbor_purity(const Tensor64& y, const std::vector<std::size_t>& labels) {
  const std::size_t n = y.dim(0);
  if (labels.size() != n || n < 2) throw Error(ErrorKind::ShapeMismatch, "labels must match embedding rows");
  const auto d = squared_distances(y);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t nn = i == 0 ? 1 : 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && d.at(i, j) < d.at(i, nn)) nn = j;
    agree += labels[nn] == labels[i];
  }
  return double(agree) / double(n);
}

void write_embedding_csv(const std::filesystem::path& path, const std::vector<EmbeddingRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << "sample_id,x,y,stress_label,severity_label\n";
  out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : rows)
    out << r.sample_id << ',' << r.x << ',' << r.y << ',' << r.stress_label << ',' << r.severity_label << '\n';
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

std::vector<EmbeddingRow> read_embedding_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "sample_id,x,y,stress_label,severity_label")
    throw Error(ErrorKind::MissingHeader, "embedding file lacks its header");
  std::vector<EmbeddingRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (std::size_t comma; (comma = line.find(',', start)) != std::string::npos; start = comma + 1)
      cells.push_back(line.substr(start, comma - start));
    cells.push_back(line.substr(start));
    if (cells.size() != 5) throw Error(ErrorKind::IoError, "malformed embedding row: " + line);
    rows.push_back({cells[0], std::stod(cells[1]), std::stod(cells[2]), cells[3], cells[4]});
  }
  return rows;
}

}  // namespace leafstress
