#pragma once

#include <iosfwd>
#include <vector>

#include "qdsc/agent/environment.hpp"
#include "qdsc/neural/dense.hpp"

namespace qdsc::agent {

using Matrix = Eigen::MatrixXd;

struct EnsembleConfig {
  int members = 5;
  std::vector<int> hidden{32, 32};
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  bool bootstrap = true;  // each member sees a resample of the data

  void validate() const;
};

/// Labelled observations: one column per sample, labels in {0, 1}.
struct TisDataset {
  Matrix features;
  Vector labels;

  [[nodiscard]] Eigen::Index size() const { return labels.size(); }
};

/// Independently initialised sigmoid networks whose spread gives the
/// confidence of the TIS estimate.
class TisEnsemble {
 public:
  TisEnsemble(int input_size, const EnsembleConfig& config, Rng& rng);
  explicit TisEnsemble(std::vector<neural::DenseNetwork> members);

  [[nodiscard]] PredictionOutput predict(const Vector& observation) const;
  /// Mean squared error per member; returns the final mean training loss.
  double train(const TisDataset& data, const EnsembleConfig& config, Rng& rng);
  /// Fraction of samples whose rounded mean prediction equals the label.
  [[nodiscard]] double accuracy(const TisDataset& data) const;

  [[nodiscard]] const std::vector<neural::DenseNetwork>& members() const { return members_; }
  [[nodiscard]] int input_size() const { return members_.front().input_size(); }

  void write(std::ostream& out) const;
  static TisEnsemble read(std::istream& in);

 private:
  std::vector<neural::DenseNetwork> members_;
};

class EnsemblePredictor final : public Predictor {
 public:
  explicit EnsemblePredictor(TisEnsemble ensemble) : ensemble_(std::move(ensemble)) {}
  [[nodiscard]] PredictionOutput predict(const grid::GridSimulation&, const Vector& observation) const override {
    return ensemble_.predict(observation);
  }
  [[nodiscard]] const TisEnsemble& ensemble() const { return ensemble_; }

 private:
  TisEnsemble ensemble_;
};

/// Runs `episodes` episodes of `policy` in an oracle-labelled environment and
/// collects every visited observation with its lookahead label.
TisDataset collect_tis_dataset(DscEnvironment& oracle_env, const Policy& policy, int episodes);

}  // namespace qdsc::agent
