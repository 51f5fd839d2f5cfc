#include "qdsc/agent/ensemble.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace qdsc::agent {

void EnsembleConfig::validate() const {
  if (members < 2) throw std::invalid_argument("ensemble: need at least two members");
  if (epochs < 0 || batch_size < 1 || learning_rate < 0.0) throw std::invalid_argument("ensemble: bad training settings");
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("ensemble: hidden sizes must be positive");
  }
}

TisEnsemble::TisEnsemble(int input_size, const EnsembleConfig& config, Rng& rng) {
  config.validate();
  std::vector<int> sizes{input_size};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(1);
  for (int m = 0; m < config.members; ++m) members_.emplace_back(sizes, neural::Activation::Sigmoid, rng);
}

TisEnsemble::TisEnsemble(std::vector<neural::DenseNetwork> members) : members_(std::move(members)) {
  if (members_.size() < 2) throw std::invalid_argument("ensemble: need at least two members");
  for (const auto& m : members_) {
    if (m.output_size() != 1 || m.input_size() != members_.front().input_size())
      throw std::invalid_argument("ensemble: members must share the input size and have one output");
  }
}

PredictionOutput TisEnsemble::predict(const Vector& observation) const {
  std::vector<double> out;
  out.reserve(members_.size());
  for (const auto& m : members_) out.push_back(m.forward(observation)(0));
  return ensemble_predict(out);
}

double TisEnsemble::train(const TisDataset& data, const EnsembleConfig& config, Rng& rng) {
  config.validate();
  const Eigen::Index n = data.size();
  if (n == 0) throw std::invalid_argument("ensemble: empty dataset");
  if (data.features.cols() != n || data.features.rows() != input_size())
    throw std::invalid_argument("ensemble: dataset shape mismatch");
  double last_loss = 0.0;
  for (auto& member : members_) {
    std::vector<Eigen::Index> pool(static_cast<std::size_t>(n));
    if (config.bootstrap) {
      std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
      for (auto& i : pool) i = pick(rng);
    } else {
      std::iota(pool.begin(), pool.end(), Eigen::Index{0});
    }
    neural::Adam opt(member.param_count());
    Vector params = member.parameters();
    double epoch_loss = 0.0;
    for (int e = 0; e < config.epochs; ++e) {
      std::shuffle(pool.begin(), pool.end(), rng);
      epoch_loss = 0.0;
      for (std::size_t start = 0; start < pool.size(); start += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t stop = std::min(pool.size(), start + static_cast<std::size_t>(config.batch_size));
        const auto b = static_cast<Eigen::Index>(stop - start);
        Matrix x(data.features.rows(), b);
        Vector y(b);
        for (Eigen::Index j = 0; j < b; ++j) {
          x.col(j) = data.features.col(pool[start + static_cast<std::size_t>(j)]);
          y(j) = data.labels(pool[start + static_cast<std::size_t>(j)]);
        }
        neural::DenseNetwork::Tape tape;
        const Matrix p = member.forward_batch(x, tape);
        const Vector err = p.row(0).transpose() - y;
        epoch_loss += err.squaredNorm();
        const Matrix upstream = (2.0 / static_cast<double>(b)) * err.transpose();
        opt.step(params, member.backward(tape, upstream).flat(), config.learning_rate);
        member.set_parameters(params);
      }
      epoch_loss /= static_cast<double>(pool.size());
    }
    last_loss += epoch_loss / static_cast<double>(members_.size());
  }
  return last_loss;
}

double TisEnsemble::accuracy(const TisDataset& data) const {
  if (data.size() == 0) return 0.0;
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double label = predict(data.features.col(i)).tis_hat >= 0.5 ? 1.0 : 0.0;
    if (label == data.labels(i)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

void TisEnsemble::write(std::ostream& out) const {
  out << "tis-ensemble v1 " << members_.size() << '\n';
  for (const auto& m : members_) m.write(out);
}

TisEnsemble TisEnsemble::read(std::istream& in) {
  std::string tag, version;
  std::size_t count = 0;
  in >> tag >> version >> count;
  if (!in || tag != "tis-ensemble" || version != "v1") throw std::invalid_argument("ensemble: bad header");
  if (count < 2 || count > 1000) throw std::invalid_argument("ensemble: bad member count");
  std::vector<neural::DenseNetwork> members;
  for (std::size_t i = 0; i < count; ++i) members.push_back(neural::DenseNetwork::read(in));
  return TisEnsemble(std::move(members));
}

TisDataset collect_tis_dataset(DscEnvironment& oracle_env, const Policy& policy, int episodes) {
  std::vector<Vector> xs;
  std::vector<double> ys;
  auto keep = [&](const Vector& augmented) {
    auto [obs, pred] = split_augmented(augmented);
    xs.push_back(std::move(obs));
    ys.push_back(pred.tis_hat);
  };
  for (int e = 0; e < episodes; ++e) {
    Vector s = oracle_env.reset();
    keep(s);
    while (true) {
      const StepResult r = oracle_env.step(policy(s));
      if (r.diverged) break;
      keep(r.next_state);
      if (r.done()) break;
      s = r.next_state;
    }
  }
  TisDataset d;
  if (xs.empty()) return d;
  d.features.resize(xs.front().size(), static_cast<Eigen::Index>(xs.size()));
  d.labels.resize(static_cast<Eigen::Index>(ys.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d.features.col(static_cast<Eigen::Index>(i)) = xs[i];
    d.labels(static_cast<Eigen::Index>(i)) = ys[i];
  }
  return d;
}

}  // namespace qdsc::agent
