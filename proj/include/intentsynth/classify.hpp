#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "intentsynth/corpus.hpp"
#include "intentsynth/embed.hpp"
#include "intentsynth/labels.hpp"

namespace intentsynth {

struct HeadConfig {
  double learning_rate = 3e-4;
  double dropout = 0.1;
  int epochs = 5;
  int batch_size = 32;
  std::uint64_t seed = 0;
  int hidden_dim = 256; // cn2 only
  // Adam moments.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static constexpr std::size_t num_classes = kNumLabels;

  void validate() const;
  bool operator==(const HeadConfig &) const = default;
};

enum class HeadKind { cn1, cn2 };

std::string_view head_kind_name(HeadKind kind);
HeadKind parse_head_kind(std::string_view name);

struct Prediction {
  IntentLabel label = IntentLabel::help;
  std::array<double, kNumLabels> probabilities{};
};

// Weights are stored output-major: cn1 uses out_w (6 x dim) and out_b; cn2
// adds hidden_w (hidden x dim) and hidden_b with a rectifier in between.
class ClassifierHead {
public:
  ClassifierHead() = default;

  static ClassifierHead zeros(HeadKind kind, std::size_t input_dim, std::string provider_id,
                              std::size_t hidden_dim = 256);
  // Uniform fan-in initialization in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static ClassifierHead initialized(HeadKind kind, std::size_t input_dim, std::string provider_id,
                                    std::uint64_t seed, std::size_t hidden_dim = 256);

  HeadKind kind() const { return kind_; }
  const std::string &provider_id() const { return provider_id_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return kind_ == HeadKind::cn2 ? hidden_b_.size() : 0; }

  Eigen::VectorXd logits(const Eigen::Ref<const Eigen::VectorXd> &x) const;
  // Throws UsageError on a dimension mismatch.
  Prediction predict(const EmbeddingVector &embedding) const;

  // Flat parameter view: [hidden_w, hidden_b,] out_w, out_b, each column-major.
  std::size_t num_parameters() const;
  double &parameter(std::size_t index);
  double parameter(std::size_t index) const;
  bool all_finite() const;

  Eigen::MatrixXd &out_w() { return out_w_; }
  Eigen::VectorXd &out_b() { return out_b_; }
  Eigen::MatrixXd &hidden_w() { return hidden_w_; }
  Eigen::VectorXd &hidden_b() { return hidden_b_; }
  const Eigen::MatrixXd &out_w() const { return out_w_; }
  const Eigen::VectorXd &out_b() const { return out_b_; }
  const Eigen::MatrixXd &hidden_w() const { return hidden_w_; }
  const Eigen::VectorXd &hidden_b() const { return hidden_b_; }

  bool operator==(const ClassifierHead &other) const;

private:
  HeadKind kind_ = HeadKind::cn1;
  std::string provider_id_;
  std::size_t input_dim_ = 0;
  Eigen::MatrixXd hidden_w_;
  Eigen::VectorXd hidden_b_;
  Eigen::MatrixXd out_w_;
  Eigen::VectorXd out_b_;
};

// Numerically stable softmax; ties in argmax go to the lowest canonical index.
Prediction softmax_prediction(const Eigen::Ref<const Eigen::VectorXd> &logits);

// Examples are rows of `inputs`; labels are canonical indices.
struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient; // flat, same layout as ClassifierHead::parameter
};

LossGradient loss_and_gradient(const ClassifierHead &head, const Eigen::Ref<const Eigen::MatrixXd> &inputs,
                               std::span<const std::size_t> labels);
double mean_cross_entropy(const ClassifierHead &head, const Eigen::Ref<const Eigen::MatrixXd> &inputs,
                          std::span<const std::size_t> labels);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  double gradient_norm = 0.0; // full analytic gradient
};

// Central differences over a random subset of at least min_coordinates parameters.
GradCheckResult grad_check(const ClassifierHead &head, const Eigen::Ref<const Eigen::MatrixXd> &inputs,
                           std::span<const std::size_t> labels, std::uint64_t seed = 0,
                           double step = 1e-5, std::size_t min_coordinates = 64);

struct Checkpoint {
  int epoch = 0; // 1-based
  ClassifierHead head;
  std::optional<double> val_accuracy;
  double train_loss = 0.0; // mean over the epoch's mini-batches
};

struct CheckpointSet {
  std::vector<Checkpoint> checkpoints;
  HeadConfig config;
  std::string optimizer;

  const Checkpoint &final() const { return checkpoints.back(); }
};

std::string optimizer_description(const HeadConfig &config);

// Training on precomputed features. Labels must contain at least two classes.
CheckpointSet train_on_features(HeadKind kind, std::span<const EmbeddingVector> features,
                                std::span<const IntentLabel> labels, const HeadConfig &config,
                                std::span<const EmbeddingVector> val_features = {},
                                std::span<const IntentLabel> val_labels = {},
                                const ClassifierHead *warm_start = nullptr);

// cn1 over frozen embeddings. All six labels must occur in `train`.
CheckpointSet train_head(const Dataset &train, const Dataset &val, const EmbeddingProvider &provider,
                         const HeadConfig &config, const ClassifierHead *warm_start = nullptr);

CheckpointSet train_baseline_cn2(std::span<const EmbeddingVector> features, std::span<const IntentLabel> labels,
                                 const HeadConfig &config);

double evaluate_accuracy(const ClassifierHead &head, std::span<const EmbeddingVector> features,
                         std::span<const IntentLabel> labels);

// Checkpoint container (JSON, format "intentsynth-checkpoint", version 1).
nlohmann::ordered_json head_to_json(const ClassifierHead &head);
ClassifierHead head_from_json(const nlohmann::json &j);
nlohmann::ordered_json checkpoints_to_json(const CheckpointSet &set);
CheckpointSet checkpoints_from_json(const nlohmann::json &j);
void save_checkpoints(const CheckpointSet &set, const std::filesystem::path &path);
CheckpointSet load_checkpoints(const std::filesystem::path &path);

// CN2 feature sidecar: one {"id": ..., "vector": [...]} per line.
struct FeatureRecord {
  std::string id;
  EmbeddingVector vector;
};
std::vector<FeatureRecord> load_feature_sidecar(const std::filesystem::path &path,
                                                std::string provider_id = "sidecar");

} // namespace intentsynth
