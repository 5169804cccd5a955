#include "wnewton/blr.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "wnewton/rng.hpp"

namespace wnewton::harness {

namespace {

double log1p_exp(double t) {
  if (t > 30.0) return t;
  if (t < -30.0) return std::exp(t);
  return std::log1p(std::exp(t));
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

BlrDataset make_synthetic_blr(int dim, int train_count, int test_count, std::uint64_t seed) {
  if (dim < 1 || train_count < 1 || test_count < 1)
    throw InvalidConfig("make_synthetic_blr: bad sizes");
  Rng rng(seed, RngStream::Generic, 0, 0);
  Eigen::VectorXd truth(dim);
  for (int j = 0; j < dim; ++j) truth[j] = rng.normal();
  truth *= 2.0 / truth.norm();  // fixed signal strength

  const auto draw = [&](int count, Eigen::MatrixXd& features, Eigen::VectorXi& labels) {
    features.resize(count, dim);
    labels.resize(count);
    for (int i = 0; i < count; ++i) {
      for (int j = 0; j < dim; ++j) features(i, j) = rng.normal();
      const double p = sigmoid(features.row(i).dot(truth));
      labels[i] = rng.uniform() < p ? 1 : 0;
    }
  };

  BlrDataset data;
  draw(train_count, data.train_features, data.train_labels);
  draw(test_count, data.test_features, data.test_labels);
  return data;
}

BlrDataset read_blr_csv(const std::string& path, double train_fraction) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("read_blr_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidConfig("read_blr_csv: missing header");

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw InvalidConfig("read_blr_csv: ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2 || rows.front().size() < 2)
    throw InvalidConfig("read_blr_csv: not enough data");

  const int total = static_cast<int>(rows.size());
  const int dim = static_cast<int>(rows.front().size()) - 1;
  const int train_count = std::max(1, static_cast<int>(train_fraction * total));

  BlrDataset data;
  data.train_features.resize(train_count, dim);
  data.train_labels.resize(train_count);
  data.test_features.resize(total - train_count, dim);
  data.test_labels.resize(total - train_count);
  for (int i = 0; i < total; ++i) {
    const double raw = rows[static_cast<std::size_t>(i)].back();
    if (raw != 0.0 && raw != 1.0)
      throw InvalidConfig("read_blr_csv: label outside {0,1}");
    for (int j = 0; j < dim; ++j) {
      const double v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (i < train_count)
        data.train_features(i, j) = v;
      else
        data.test_features(i - train_count, j) = v;
    }
    if (i < train_count)
      data.train_labels[i] = static_cast<int>(raw);
    else
      data.test_labels[i - train_count] = static_cast<int>(raw);
  }
  return data;
}

struct BlrPosterior::State {
  BlrDataset data;
  double prior_scale = 1.0;
  std::vector<int> batch;  // indices into the training split
};

BlrPosterior::BlrPosterior(BlrDataset dataset, double prior_scale)
    : state_(std::make_shared<State>()) {
  if (!(prior_scale > 0.0)) throw InvalidConfig("BlrPosterior: prior_scale must be positive");
  state_->data = std::move(dataset);
  state_->prior_scale = prior_scale;
  use_full_batch();
}

void BlrPosterior::use_full_batch() {
  const int n = static_cast<int>(state_->data.train_features.rows());
  state_->batch.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) state_->batch[static_cast<std::size_t>(i)] = i;
}

void BlrPosterior::resample_batch(std::uint64_t seed, int iteration) {
  const int n = static_cast<int>(state_->data.train_features.rows());
  const int b = state_->data.batch_size;
  if (b <= 0 || b >= n) {
    use_full_batch();
    return;
  }
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  Rng rng(seed, RngStream::Batch, static_cast<std::uint64_t>(iteration), 0);
  for (int i = 0; i < b; ++i) {
    const int j = i + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(b));
  state_->batch = std::move(pool);
}

TargetModel BlrPosterior::model() const {
  auto state = state_;
  const int dim = static_cast<int>(state->data.train_features.cols());

  TargetModel model;
  model.dim = dim;
  model.potential = [state](const Eigen::VectorXd& w) {
    if (state->batch.empty()) throw InvalidConfig("blr potential: empty batch");
    const double n_data = static_cast<double>(state->data.train_features.rows());
    const double scale = n_data / static_cast<double>(state->batch.size());
    double nll = 0.0;
    for (int idx : state->batch) {
      const double margin =
          (2.0 * state->data.train_labels[idx] - 1.0) * state->data.train_features.row(idx).dot(w);
      nll += log1p_exp(-margin);
    }
    const double ps2 = state->prior_scale * state->prior_scale;
    return scale * nll + w.squaredNorm() / (2.0 * ps2);
  };
  model.gradient = [state](const Eigen::VectorXd& w) {
    const double n_data = static_cast<double>(state->data.train_features.rows());
    const double scale = n_data / static_cast<double>(state->batch.size());
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(w.size());
    for (int idx : state->batch) {
      const double sign = 2.0 * state->data.train_labels[idx] - 1.0;
      const double margin = sign * state->data.train_features.row(idx).dot(w);
      grad -= sigmoid(-margin) * sign * state->data.train_features.row(idx).transpose();
    }
    const double ps2 = state->prior_scale * state->prior_scale;
    return (scale * grad + w / ps2).eval();
  };
  model.hessian = [state, dim](const Eigen::VectorXd& w) {
    const double n_data = static_cast<double>(state->data.train_features.rows());
    const double scale = n_data / static_cast<double>(state->batch.size());
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(dim, dim);
    for (int idx : state->batch) {
      const double p = sigmoid(state->data.train_features.row(idx).dot(w));
      hess += p * (1.0 - p) * state->data.train_features.row(idx).transpose() *
              state->data.train_features.row(idx);
    }
    const double ps2 = state->prior_scale * state->prior_scale;
    return (scale * hess + Eigen::MatrixXd::Identity(dim, dim) / ps2).eval();
  };
  return model;
}

const BlrDataset& BlrPosterior::dataset() const { return state_->data; }

double BlrPosterior::prior_scale() const { return state_->prior_scale; }

}  // namespace wnewton::harness
