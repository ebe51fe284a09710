#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "attre2vec/common.hpp"
#include "attre2vec/graph.hpp"
#include "attre2vec/model.hpp"

namespace attre2vec {

struct LabeledEmbeddingSet {
  Matrix features;          // n x d
  std::vector<int> labels;  // n class indices in [0, class_count)
  int class_count = 0;
};

// ---------------------------------------------------------------------------
// Multinomial logistic regression, cross-entropy + L2 penalty on the weights
// (bias unpenalized), minimized by full-batch gradient descent with
// backtracking line search. Deterministic: zero init, fixed step rules.
//
//   J(W, b) = -(1/n) sum_i log p(y_i | x_i) + (l2/2) ||W||_F^2
// ---------------------------------------------------------------------------

class LogisticRegressionModel {
 public:
  LogisticRegressionModel() = default;
  LogisticRegressionModel(Matrix weights, Vec bias)
      : weights_(std::move(weights)), bias_(std::move(bias)) {}

  int class_count() const { return static_cast<int>(weights_.rows); }

  Matrix predict_proba(const Matrix& x) const {
    if (x.cols != weights_.cols)
      throw ShapeError("logistic regression: feature width mismatch");
    Matrix proba(x.rows, weights_.rows);
    Vec logits(weights_.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
      const auto row = x.row(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < weights_.rows; ++c) {
        double z = bias_[c];
        const auto w = weights_.row(c);
        for (std::size_t j = 0; j < x.cols; ++j) z += w[j] * row[j];
        logits[c] = z;
        mx = std::max(mx, z);
      }
      double total = 0.0;
      for (std::size_t c = 0; c < weights_.rows; ++c) {
        proba.at(i, c) = std::exp(logits[c] - mx);
        total += proba.at(i, c);
      }
      for (std::size_t c = 0; c < weights_.rows; ++c) proba.at(i, c) /= total;
    }
    return proba;
  }

  std::vector<int> predict(const Matrix& x) const {
    const Matrix proba = predict_proba(x);
    std::vector<int> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
      const auto row = proba.row(i);
      out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) -
                                row.begin());
    }
    return out;
  }

  const Matrix& weights() const { return weights_; }
  const Vec& bias() const { return bias_; }

 private:
  Matrix weights_;  // C x d
  Vec bias_;        // C
};

namespace detail {

inline double lr_objective_and_gradient(const Matrix& x,
                                        const std::vector<int>& labels,
                                        int class_count, double l2,
                                        const Matrix& w, const Vec& b,
                                        Matrix* gw, Vec* gb) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  const std::size_t c_n = static_cast<std::size_t>(class_count);
  gw->values.assign(c_n * d, 0.0);
  gb->assign(c_n, 0.0);
  double loss = 0.0;
  Vec logits(c_n), p(c_n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = x.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < c_n; ++c) {
      double z = b[c];
      const double* wr = w.values.data() + c * d;
      for (std::size_t j = 0; j < d; ++j) z += wr[j] * row[j];
      logits[c] = z;
      mx = std::max(mx, z);
    }
    double total = 0.0;
    for (std::size_t c = 0; c < c_n; ++c) {
      p[c] = std::exp(logits[c] - mx);
      total += p[c];
    }
    for (std::size_t c = 0; c < c_n; ++c) p[c] /= total;
    loss -= std::log(std::max(p[static_cast<std::size_t>(labels[i])], 1e-300));
    for (std::size_t c = 0; c < c_n; ++c) {
      const double delta =
          p[c] - (static_cast<std::size_t>(labels[i]) == c ? 1.0 : 0.0);
      double* gwr = gw->values.data() + c * d;
      for (std::size_t j = 0; j < d; ++j) gwr[j] += delta * row[j];
      (*gb)[c] += delta;
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  loss *= inv;
  for (double& g : gw->values) g *= inv;
  for (double& g : *gb) g *= inv;
  for (std::size_t k = 0; k < w.values.size(); ++k) {
    loss += 0.5 * l2 * w.values[k] * w.values[k];
    gw->values[k] += l2 * w.values[k];
  }
  return loss;
}

}  // namespace detail

inline LogisticRegressionModel logistic_regression_fit(
    const LabeledEmbeddingSet& train, double l2_strength = 1.0,
    double grad_tolerance = 1e-6, std::size_t max_iterations = 5000) {
  const std::size_t n = train.features.rows;
  if (n == 0 || n != train.labels.size())
    throw ValidationError("logistic regression: empty or mismatched training set");
  int distinct = 0;
  std::vector<char> seen(static_cast<std::size_t>(train.class_count), 0);
  for (int y : train.labels) {
    if (y < 0 || y >= train.class_count)
      throw ValidationError("logistic regression: label out of range");
    if (!seen[static_cast<std::size_t>(y)]) {
      seen[static_cast<std::size_t>(y)] = 1;
      ++distinct;
    }
  }
  if (distinct < 2)
    throw ValidationError("logistic regression: training labels are single-class");

  const std::size_t d = train.features.cols;
  const std::size_t c_n = static_cast<std::size_t>(train.class_count);
  Matrix w(c_n, d);
  Vec b(c_n, 0.0);
  Matrix gw(c_n, d);
  Vec gb(c_n, 0.0);
  Matrix w_try(c_n, d);
  Vec b_try(c_n, 0.0);
  Matrix g_unused(c_n, d);
  Vec gb_unused(c_n, 0.0);

  double step = 1.0;
  double loss = detail::lr_objective_and_gradient(train.features, train.labels,
                                                  train.class_count, l2_strength,
                                                  w, b, &gw, &gb);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    double gnorm2 = 0.0;
    for (double g : gw.values) gnorm2 += g * g;
    for (double g : gb) gnorm2 += g * g;
    if (std::sqrt(gnorm2) <= grad_tolerance) break;

    // Armijo backtracking; the objective never increases across iterations.
    step = std::min(step * 2.0, 1e4);
    double trial_loss = 0.0;
    for (int half = 0; half < 80; ++half) {
      for (std::size_t k = 0; k < w.values.size(); ++k)
        w_try.values[k] = w.values[k] - step * gw.values[k];
      for (std::size_t c = 0; c < c_n; ++c) b_try[c] = b[c] - step * gb[c];
      trial_loss = detail::lr_objective_and_gradient(
          train.features, train.labels, train.class_count, l2_strength, w_try,
          b_try, &g_unused, &gb_unused);
      if (trial_loss <= loss - 1e-4 * step * gnorm2) break;
      step *= 0.5;
    }
    if (trial_loss > loss) break;  // no descent direction progress left
    w.values.swap(w_try.values);
    b.swap(b_try);
    gw.values.swap(g_unused.values);
    gb.swap(gb_unused);
    loss = trial_loss;
  }
  return LogisticRegressionModel(std::move(w), std::move(b));
}

inline double logistic_regression_loss(const LabeledEmbeddingSet& set,
                                       const LogisticRegressionModel& model,
                                       double l2_strength) {
  Matrix gw(model.weights().rows, model.weights().cols);
  Vec gb(model.bias().size(), 0.0);
  return detail::lr_objective_and_gradient(set.features, set.labels,
                                           model.class_count(), l2_strength,
                                           model.weights(), model.bias(), &gw,
                                           &gb);
}

// ---------------------------------------------------------------------------
// AUC. Binary AUC by tie-averaged ranks (equivalent to concordant-pair
// counting with ties worth 1/2); multiclass is macro one-vs-rest over the
// classes present with both positives and negatives.
// ---------------------------------------------------------------------------

inline double binary_auc(const Vec& scores, const std::vector<char>& positive) {
  if (scores.size() != positive.size())
    throw ShapeError("binary_auc: size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        pos_rank_sum += avg_rank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0)
    throw ValidationError("binary_auc: needs both positives and negatives");
  return (pos_rank_sum - 0.5 * static_cast<double>(pos) *
                             static_cast<double>(pos + 1)) /
         (static_cast<double>(pos) * static_cast<double>(neg));
}

// Macro one-vs-rest AUC over per-class probability columns. Classes without
// both positives and negatives in `labels` are excluded from the average.
inline double auc_score(const Matrix& proba, const std::vector<int>& labels) {
  if (proba.rows != labels.size()) throw ShapeError("auc_score: size mismatch");
  if (proba.rows == 0) throw ValidationError("auc_score: empty input");
  double total = 0.0;
  std::size_t used = 0;
  Vec scores(proba.rows);
  std::vector<char> positive(proba.rows);
  for (std::size_t c = 0; c < proba.cols; ++c) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < proba.rows; ++i) {
      scores[i] = proba.at(i, c);
      positive[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
      pos += positive[i];
    }
    if (pos == 0 || pos == proba.rows) continue;
    total += binary_auc(scores, positive);
    ++used;
  }
  if (used == 0)
    throw ValidationError("auc_score: no class has both positives and negatives");
  return total / static_cast<double>(used);
}

// ---------------------------------------------------------------------------
// k-means++ (D^2 seeding, Lloyd iterations). Deterministic per seed; ties in
// the nearest-center assignment break toward the lowest center index.
// ---------------------------------------------------------------------------

struct KMeansResult {
  std::vector<int> assignments;
  Matrix centers;
  Vec inertia_trace;  // inertia after each assignment pass; non-increasing
};

inline KMeansResult kmeans_pp(const Matrix& points, std::size_t k,
                              std::uint64_t seed, std::size_t max_iterations = 300) {
  const std::size_t n = points.rows;
  const std::size_t d = points.cols;
  if (k == 0) throw ConfigError("kmeans: k must be >= 1");
  if (n < k)
    throw ConfigError("kmeans: " + std::to_string(n) + " points < k = " +
                      std::to_string(k));
  Rng rng(seed);

  const auto dist2 = [&](std::size_t i, const double* center) {
    double acc = 0.0;
    const auto row = points.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = row[j] - center[j];
      acc += diff * diff;
    }
    return acc;
  };

  Matrix centers(k, d);
  {
    const std::size_t first = rng.index(n);
    std::copy_n(points.row(first).begin(), d, centers.row(0).begin());
    Vec best(n);
    for (std::size_t i = 0; i < n; ++i) best[i] = dist2(i, centers.row(0).data());
    for (std::size_t c = 1; c < k; ++c) {
      double total = 0.0;
      for (double v : best) total += v;
      std::size_t chosen = 0;
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        chosen = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += best[i];
          if (acc > target) {
            chosen = i;
            break;
          }
        }
      } else {
        chosen = rng.index(n);
      }
      std::copy_n(points.row(chosen).begin(), d, centers.row(c).begin());
      for (std::size_t i = 0; i < n; ++i)
        best[i] = std::min(best[i], dist2(i, centers.row(c).data()));
    }
  }

  std::vector<int> assignments(n, -1);
  KMeansResult result;
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best_c = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = dist2(i, centers.row(c).data());
        if (dd < best_d) {
          best_d = dd;
          best_c = static_cast<int>(c);
        }
      }
      inertia += best_d;
      if (assignments[i] != best_c) {
        assignments[i] = best_c;
        changed = true;
      }
    }
    result.inertia_trace.push_back(inertia);
    if (!changed) break;
    // centroid update; an emptied cluster keeps its previous center
    Matrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = points.row(i);
      double* s = sums.values.data() +
                  static_cast<std::size_t>(assignments[i]) * d;
      for (std::size_t j = 0; j < d; ++j) s[j] += row[j];
      ++counts[static_cast<std::size_t>(assignments[i])];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      const double inv = 1.0 / static_cast<double>(counts[c]);
      for (std::size_t j = 0; j < d; ++j)
        centers.at(c, j) = sums.at(c, j) * inv;
    }
  }
  result.assignments = std::move(assignments);
  result.centers = std::move(centers);
  return result;
}

// ---------------------------------------------------------------------------
// Unsupervised clustering accuracy: best cluster-to-class matching on the
// contingency matrix (Hungarian algorithm), matched fraction.
// ---------------------------------------------------------------------------

namespace detail {

// Min-cost assignment on a square cost matrix (potentials + augmenting
// paths, O(n^3)). Returns row assigned to each column.
inline std::vector<int> hungarian_min_cost(const Matrix& cost) {
  const std::size_t n = cost.rows;
  const double inf = std::numeric_limits<double>::infinity();
  Vec u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = static_cast<int>(i);
    std::size_t j0 = 0;
    Vec minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = static_cast<std::size_t>(p[j0]);
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost.at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = static_cast<int>(j0);
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[static_cast<std::size_t>(p[j])] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = static_cast<std::size_t>(way[j0]);
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_of_col(n, -1);
  for (std::size_t j = 1; j <= n; ++j) row_of_col[j - 1] = p[j] - 1;
  return row_of_col;
}

}  // namespace detail

inline double clustering_accuracy(const std::vector<int>& assignments,
                                  const std::vector<int>& labels) {
  if (assignments.size() != labels.size())
    throw ValidationError("clustering_accuracy: length mismatch");
  if (assignments.empty())
    throw ValidationError("clustering_accuracy: empty input");
  int k = 0, c = 0;
  for (int a : assignments) k = std::max(k, a + 1);
  for (int y : labels) c = std::max(c, y + 1);
  const std::size_t dim = static_cast<std::size_t>(std::max(k, c));
  Matrix counts(dim, dim);
  for (std::size_t i = 0; i < assignments.size(); ++i)
    counts.at(static_cast<std::size_t>(assignments[i]),
              static_cast<std::size_t>(labels[i])) += 1.0;
  // maximize matches == minimize (max - count)
  double mx = 0.0;
  for (double val : counts.values) mx = std::max(mx, val);
  Matrix cost(dim, dim);
  for (std::size_t i = 0; i < cost.values.size(); ++i)
    cost.values[i] = mx - counts.values[i];
  const std::vector<int> row_of_col = detail::hungarian_min_cost(cost);
  double matched = 0.0;
  for (std::size_t j = 0; j < dim; ++j)
    matched += counts.at(static_cast<std::size_t>(row_of_col[j]), j);
  return matched / static_cast<double>(assignments.size());
}

// ---------------------------------------------------------------------------
// Embedding export: src,dst, d embedding columns, 3 attention columns, label.
// Values printed with 17 significant digits so a reload is bit-exact.
// ---------------------------------------------------------------------------

inline void export_embeddings(const std::string& path,
                              const std::vector<EdgeKey>& endpoints,
                              const std::vector<EdgeEmbedding>& embeddings,
                              const std::vector<int>& labels) {
  if (endpoints.size() != embeddings.size() || endpoints.size() != labels.size())
    throw ValidationError("export_embeddings: row count mismatch");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const std::size_t d = embeddings.empty() ? 0 : embeddings.front().h.size();
  out << "src,dst";
  for (std::size_t j = 0; j < d; ++j) out << ",e" << j;
  out << ",att_edge,att_u,att_v,label\n";
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    const EdgeEmbedding& e = embeddings[i];
    if (e.h.size() != d)
      throw ValidationError("export_embeddings: ragged embedding widths");
    out << endpoints[i].u << ',' << endpoints[i].v;
    for (double x : e.h) out << ',' << format_real(x);
    for (double a : e.attention) out << ',' << format_real(a);
    out << ',' << labels[i] << '\n';
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

struct EmbeddingFile {
  std::vector<EdgeKey> endpoints;
  Matrix embeddings;
  Matrix attention;  // n x 3
  std::vector<int> labels;
};

inline EmbeddingFile read_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": missing header");
  std::size_t columns = 1;
  for (char ch : line) columns += ch == ',';
  if (columns < 6) throw ValidationError(path + ": too few columns");
  const std::size_t d = columns - 6;
  EmbeddingFile file;
  std::vector<double> row;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    row.clear();
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      try {
        row.push_back(std::stod(line.substr(start, end - start)));
      } catch (const std::exception&) {
        throw ValidationError(path + ":" + std::to_string(line_no) +
                              ": malformed number");
      }
      start = end + 1;
    }
    if (row.size() != columns)
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": expected " + std::to_string(columns) + " columns");
    file.endpoints.push_back(make_edge_key(static_cast<NodeId>(row[0]),
                                           static_cast<NodeId>(row[1])));
    file.labels.push_back(static_cast<int>(row[columns - 1]));
    file.embeddings.values.insert(file.embeddings.values.end(), row.begin() + 2,
                                  row.begin() + 2 + static_cast<long>(d));
    file.attention.values.insert(file.attention.values.end(),
                                 row.begin() + 2 + static_cast<long>(d),
                                 row.begin() + 2 + static_cast<long>(d) + 3);
  }
  file.embeddings.rows = file.endpoints.size();
  file.embeddings.cols = d;
  file.attention.rows = file.endpoints.size();
  file.attention.cols = 3;
  return file;
}

}  // namespace attre2vec
