#include "intentsynth/classify.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "intentsynth/errors.hpp"
#include "intentsynth/rng.hpp"

namespace intentsynth {

void HeadConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ConfigError("dropout must lie in [0, 1)");
  if (epochs <= 0)
    throw ConfigError("epochs must be positive");
  if (batch_size <= 0)
    throw ConfigError("batch_size must be positive");
  if (hidden_dim <= 0)
    throw ConfigError("hidden_dim must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
    throw ConfigError("invalid Adam moments");
}

std::string_view head_kind_name(HeadKind kind) { return kind == HeadKind::cn1 ? "cn1" : "cn2"; }

HeadKind parse_head_kind(std::string_view name) {
  if (name == "cn1")
    return HeadKind::cn1;
  if (name == "cn2")
    return HeadKind::cn2;
  throw DataError("unknown head kind '" + std::string(name) + "'");
}

ClassifierHead ClassifierHead::zeros(HeadKind kind, std::size_t input_dim, std::string provider_id,
                                     std::size_t hidden_dim) {
  if (input_dim == 0)
    throw UsageError("head input dimension must be positive");
  ClassifierHead h;
  h.kind_ = kind;
  h.provider_id_ = std::move(provider_id);
  h.input_dim_ = input_dim;
  const auto d = static_cast<Eigen::Index>(input_dim);
  const auto c = static_cast<Eigen::Index>(kNumLabels);
  if (kind == HeadKind::cn2) {
    if (hidden_dim == 0)
      throw UsageError("cn2 hidden dimension must be positive");
    const auto hd = static_cast<Eigen::Index>(hidden_dim);
    h.hidden_w_ = Eigen::MatrixXd::Zero(hd, d);
    h.hidden_b_ = Eigen::VectorXd::Zero(hd);
    h.out_w_ = Eigen::MatrixXd::Zero(c, hd);
  } else {
    h.out_w_ = Eigen::MatrixXd::Zero(c, d);
  }
  h.out_b_ = Eigen::VectorXd::Zero(c);
  return h;
}

ClassifierHead ClassifierHead::initialized(HeadKind kind, std::size_t input_dim, std::string provider_id,
                                           std::uint64_t seed, std::size_t hidden_dim) {
  auto h = zeros(kind, input_dim, std::move(provider_id), hidden_dim);
  SplitMix64 rng(mix_seed(seed, 0x1417));
  auto fill = [&](Eigen::MatrixXd &m, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        m(i, j) = rng.uniform(-bound, bound);
  };
  if (kind == HeadKind::cn2) {
    fill(h.hidden_w_, static_cast<double>(input_dim));
    fill(h.out_w_, static_cast<double>(hidden_dim));
  } else {
    fill(h.out_w_, static_cast<double>(input_dim));
  }
  return h;
}

Eigen::VectorXd ClassifierHead::logits(const Eigen::Ref<const Eigen::VectorXd> &x) const {
  if (kind_ == HeadKind::cn2) {
    const Eigen::VectorXd hidden = (hidden_w_ * x + hidden_b_).cwiseMax(0.0);
    return out_w_ * hidden + out_b_;
  }
  return out_w_ * x + out_b_;
}

Prediction softmax_prediction(const Eigen::Ref<const Eigen::VectorXd> &logits) {
  Prediction p;
  const double top = logits.maxCoeff();
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    p.probabilities[k] = std::exp(logits(static_cast<Eigen::Index>(k)) - top);
    sum += p.probabilities[k];
  }
  for (auto &v : p.probabilities)
    v /= sum;
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumLabels; ++k) {
    if (logits(static_cast<Eigen::Index>(k)) > logits(static_cast<Eigen::Index>(best)))
      best = k;
  }
  p.label = kAllLabels[best];
  return p;
}

Prediction ClassifierHead::predict(const EmbeddingVector &embedding) const {
  if (embedding.dim() != input_dim_)
    throw UsageError("predict: embedding dim " + std::to_string(embedding.dim()) + " does not match head dim " +
                     std::to_string(input_dim_));
  const Eigen::Map<const Eigen::VectorXd> x(embedding.values.data(),
                                            static_cast<Eigen::Index>(embedding.values.size()));
  return softmax_prediction(logits(x));
}

std::size_t ClassifierHead::num_parameters() const {
  return static_cast<std::size_t>(hidden_w_.size() + hidden_b_.size() + out_w_.size() + out_b_.size());
}

double &ClassifierHead::parameter(std::size_t index) {
  auto i = static_cast<Eigen::Index>(index);
  if (i < hidden_w_.size())
    return hidden_w_.data()[i];
  i -= hidden_w_.size();
  if (i < hidden_b_.size())
    return hidden_b_.data()[i];
  i -= hidden_b_.size();
  if (i < out_w_.size())
    return out_w_.data()[i];
  i -= out_w_.size();
  if (i < out_b_.size())
    return out_b_.data()[i];
  throw std::out_of_range("parameter index out of range");
}

double ClassifierHead::parameter(std::size_t index) const {
  return const_cast<ClassifierHead *>(this)->parameter(index);
}

bool ClassifierHead::all_finite() const {
  return hidden_w_.allFinite() && hidden_b_.allFinite() && out_w_.allFinite() && out_b_.allFinite();
}

bool ClassifierHead::operator==(const ClassifierHead &o) const {
  auto same = [](const auto &a, const auto &b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
  };
  return kind_ == o.kind_ && provider_id_ == o.provider_id_ && input_dim_ == o.input_dim_ &&
         same(hidden_w_, o.hidden_w_) && same(hidden_b_, o.hidden_b_) && same(out_w_, o.out_w_) &&
         same(out_b_, o.out_b_);
}

namespace {

struct Forward {
  Eigen::MatrixXd pre_hidden; // cn2 only
  Eigen::MatrixXd hidden;     // cn2 only
  Eigen::MatrixXd probs;
  double loss = 0.0;
};

Forward forward(const ClassifierHead &head, const Eigen::Ref<const Eigen::MatrixXd> &inputs,
                std::span<const std::size_t> labels) {
  if (static_cast<std::size_t>(inputs.cols()) != head.input_dim())
    throw UsageError("input dim does not match head dim");
  if (static_cast<std::size_t>(inputs.rows()) != labels.size() || labels.empty())
    throw UsageError("batch must be non-empty with one label per row");
  Forward f;
  Eigen::MatrixXd logits;
  if (head.kind() == HeadKind::cn2) {
    f.pre_hidden = (inputs * head.hidden_w().transpose()).rowwise() + head.hidden_b().transpose();
    f.hidden = f.pre_hidden.cwiseMax(0.0);
    logits = (f.hidden * head.out_w().transpose()).rowwise() + head.out_b().transpose();
  } else {
    logits = (inputs * head.out_w().transpose()).rowwise() + head.out_b().transpose();
  }
  f.probs.resize(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(r).array() - top).exp();
    const double z = e.sum();
    f.probs.row(r) = e / z;
    total += (top + std::log(z)) - logits(r, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(r)]));
  }
  f.loss = total / static_cast<double>(labels.size());
  return f;
}

void append(std::vector<double> &out, const Eigen::MatrixXd &m) {
  out.insert(out.end(), m.data(), m.data() + m.size());
}

} // namespace

double mean_cross_entropy(const ClassifierHead &head, const Eigen::Ref<const Eigen::MatrixXd> &inputs,
                          std::span<const std::size_t> labels) {
  return forward(head, inputs, labels).loss;
}

LossGradient loss_and_gradient(const ClassifierHead &head, const Eigen::Ref<const Eigen::MatrixXd> &inputs,
                               std::span<const std::size_t> labels) {
  auto f = forward(head, inputs, labels);
  Eigen::MatrixXd delta = f.probs;
  for (std::size_t r = 0; r < labels.size(); ++r)
    delta(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(labels[r])) -= 1.0;
  delta /= static_cast<double>(labels.size());

  LossGradient out;
  out.loss = f.loss;
  out.gradient.reserve(head.num_parameters());
  if (head.kind() == HeadKind::cn2) {
    const Eigen::MatrixXd d_out_w = delta.transpose() * f.hidden;
    const Eigen::VectorXd d_out_b = delta.colwise().sum().transpose();
    Eigen::MatrixXd d_hidden = delta * head.out_w();
    d_hidden = d_hidden.array() * (f.pre_hidden.array() > 0.0).cast<double>();
    const Eigen::MatrixXd d_hidden_w = d_hidden.transpose() * inputs;
    const Eigen::VectorXd d_hidden_b = d_hidden.colwise().sum().transpose();
    append(out.gradient, d_hidden_w);
    append(out.gradient, d_hidden_b);
    append(out.gradient, d_out_w);
    append(out.gradient, d_out_b);
  } else {
    const Eigen::MatrixXd d_out_w = delta.transpose() * inputs;
    const Eigen::VectorXd d_out_b = delta.colwise().sum().transpose();
    append(out.gradient, d_out_w);
    append(out.gradient, d_out_b);
  }
  return out;
}

GradCheckResult grad_check(const ClassifierHead &head, const Eigen::Ref<const Eigen::MatrixXd> &inputs,
                           std::span<const std::size_t> labels, std::uint64_t seed, double step,
                           std::size_t min_coordinates) {
  const auto analytic = loss_and_gradient(head, inputs, labels);
  GradCheckResult result;
  double sq = 0.0;
  for (double g : analytic.gradient)
    sq += g * g;
  result.gradient_norm = std::sqrt(sq);

  const auto total = head.num_parameters();
  std::vector<std::size_t> coords(total);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  const auto count = std::min(total, std::max<std::size_t>(min_coordinates, 50));
  SplitMix64 rng(mix_seed(seed, 0x6c));
  for (std::size_t i = 0; i < count; ++i)
    std::swap(coords[i], coords[i + static_cast<std::size_t>(rng.below(total - i))]);

  ClassifierHead probe = head;
  for (std::size_t k = 0; k < count; ++k) {
    const auto idx = coords[k];
    const double original = probe.parameter(idx);
    probe.parameter(idx) = original + step;
    const double plus = mean_cross_entropy(probe, inputs, labels);
    probe.parameter(idx) = original - step;
    const double minus = mean_cross_entropy(probe, inputs, labels);
    probe.parameter(idx) = original;

    const double numeric = (plus - minus) / (2.0 * step);
    const double a = analytic.gradient[idx];
    const double scale = std::max(std::abs(a), std::abs(numeric));
    const double rel = scale == 0.0 ? 0.0 : std::abs(a - numeric) / scale;
    result.max_relative_error = std::max(result.max_relative_error, rel);
  }
  result.coordinates = count;
  return result;
}

namespace {

// Shortest text that reads back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

} // namespace

std::string optimizer_description(const HeadConfig &c) {
  return "adam(lr=" + shortest(c.learning_rate) + ",beta1=" + shortest(c.beta1) + ",beta2=" + shortest(c.beta2) +
         ",eps=" + shortest(c.epsilon) + ")";
}

namespace {

Eigen::MatrixXd stack(std::span<const EmbeddingVector> features, std::size_t dim) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(features.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < features.size(); ++r) {
    if (features[r].dim() != dim)
      throw UsageError("feature " + std::to_string(r) + " has dim " + std::to_string(features[r].dim()) +
                       ", expected " + std::to_string(dim));
    for (std::size_t c = 0; c < dim; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = features[r].values[c];
  }
  return m;
}

} // namespace

double evaluate_accuracy(const ClassifierHead &head, std::span<const EmbeddingVector> features,
                         std::span<const IntentLabel> labels) {
  if (features.size() != labels.size() || features.empty())
    throw UsageError("evaluate_accuracy: need one label per feature and at least one feature");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < features.size(); ++i)
    hits += head.predict(features[i]).label == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(features.size());
}

CheckpointSet train_on_features(HeadKind kind, std::span<const EmbeddingVector> features,
                                std::span<const IntentLabel> labels, const HeadConfig &config,
                                std::span<const EmbeddingVector> val_features,
                                std::span<const IntentLabel> val_labels, const ClassifierHead *warm_start) {
  config.validate();
  if (features.empty())
    throw DataError("training set is empty");
  if (features.size() != labels.size())
    throw UsageError("one label per training feature is required");
  if (val_features.size() != val_labels.size())
    throw UsageError("one label per validation feature is required");
  const std::size_t dim = features.front().dim();
  if (dim == 0)
    throw DataError("training features have dimension 0");

  std::array<bool, kNumLabels> seen{};
  for (auto l : labels)
    seen[label_index(l)] = true;
  if (std::count(seen.begin(), seen.end(), true) < 2)
    throw DataError("training labels contain fewer than two classes");

  ClassifierHead head;
  const auto provider_id = features.front().provider_id;
  if (warm_start) {
    if (warm_start->input_dim() != dim)
      throw DataError("embedding dim " + std::to_string(dim) + " does not match existing head dim " +
                      std::to_string(warm_start->input_dim()));
    if (warm_start->kind() != kind)
      throw UsageError("warm-start head kind differs from the requested kind");
    head = *warm_start;
  } else {
    head = ClassifierHead::initialized(kind, dim, provider_id, config.seed,
                                       static_cast<std::size_t>(config.hidden_dim));
  }

  const Eigen::MatrixXd inputs = stack(features, dim);
  std::vector<std::size_t> targets(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    targets[i] = label_index(labels[i]);

  const auto n_params = head.num_parameters();
  std::vector<double> m(n_params, 0.0), v(n_params, 0.0);
  std::uint64_t t = 0;
  SplitMix64 dropout_rng(mix_seed(config.seed, 0xd0));
  const double keep = 1.0 - config.dropout;

  CheckpointSet set;
  set.config = config;
  set.optimizer = optimizer_description(config);

  std::vector<std::size_t> order(features.size());
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 shuffle_rng(mix_seed(config.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    shuffle_in_place(std::span(order), shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto count = std::min(batch, order.size() - start);
      Eigen::MatrixXd xb(static_cast<Eigen::Index>(count), inputs.cols());
      std::vector<std::size_t> yb(count);
      for (std::size_t r = 0; r < count; ++r) {
        xb.row(static_cast<Eigen::Index>(r)) = inputs.row(static_cast<Eigen::Index>(order[start + r]));
        yb[r] = targets[order[start + r]];
      }
      if (config.dropout > 0.0) {
        for (Eigen::Index c = 0; c < xb.cols(); ++c)
          for (Eigen::Index r = 0; r < xb.rows(); ++r)
            xb(r, c) = dropout_rng.uniform() < keep ? xb(r, c) / keep : 0.0;
      }
      const auto lg = loss_and_gradient(head, xb, yb);
      loss_sum += lg.loss * static_cast<double>(count);

      ++t;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
      for (std::size_t p = 0; p < n_params; ++p) {
        const double g = lg.gradient[p];
        m[p] = config.beta1 * m[p] + (1.0 - config.beta1) * g;
        v[p] = config.beta2 * v[p] + (1.0 - config.beta2) * g * g;
        head.parameter(p) -= config.learning_rate * (m[p] / c1) / (std::sqrt(v[p] / c2) + config.epsilon);
      }
    }
    if (!head.all_finite())
      throw DataError("training diverged: non-finite parameters at epoch " + std::to_string(epoch));

    Checkpoint cp;
    cp.epoch = epoch;
    cp.head = head;
    cp.train_loss = loss_sum / static_cast<double>(order.size());
    if (!val_features.empty())
      cp.val_accuracy = evaluate_accuracy(head, val_features, val_labels);
    set.checkpoints.push_back(std::move(cp));
  }
  return set;
}

CheckpointSet train_head(const Dataset &train, const Dataset &val, const EmbeddingProvider &provider,
                         const HeadConfig &config, const ClassifierHead *warm_start) {
  if (train.empty())
    throw DataError("training set '" + train.name + "' is empty");
  const auto counts = train.label_counts();
  for (auto label : kAllLabels) {
    if (counts[label_index(label)] == 0)
      throw DataError("label '" + std::string(label_name(label)) + "' is missing from training set '" +
                      train.name + "'");
  }
  auto embed_all = [&](const Dataset &d, std::vector<EmbeddingVector> &features,
                       std::vector<IntentLabel> &labels) {
    std::vector<std::string> texts;
    texts.reserve(d.items.size());
    for (const auto &item : d.items) {
      texts.push_back(item.text);
      labels.push_back(item.label);
    }
    if (!texts.empty())
      features = provider.embed_batch(texts);
  };
  std::vector<EmbeddingVector> train_x, val_x;
  std::vector<IntentLabel> train_y, val_y;
  embed_all(train, train_x, train_y);
  embed_all(val, val_x, val_y);
  for (const auto &v : train_x) {
    if (v.dim() != provider.dim())
      throw DataError("provider returned dim " + std::to_string(v.dim()) + ", declared " +
                      std::to_string(provider.dim()));
  }
  return train_on_features(HeadKind::cn1, train_x, train_y, config, val_x, val_y, warm_start);
}

CheckpointSet train_baseline_cn2(std::span<const EmbeddingVector> features, std::span<const IntentLabel> labels,
                                 const HeadConfig &config) {
  return train_on_features(HeadKind::cn2, features, labels, config);
}

namespace {

nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd &m) {
  nlohmann::ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  auto data = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      data.push_back(m(r, c));
  j["data"] = std::move(data);
  return j;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json &j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto &data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw DataError("checkpoint matrix size mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = data[k++].get<double>();
  return m;
}

nlohmann::ordered_json config_to_json(const HeadConfig &c) {
  nlohmann::ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["dropout"] = c.dropout;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["hidden_dim"] = c.hidden_dim;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["num_classes"] = HeadConfig::num_classes;
  return j;
}

HeadConfig config_from_json(const nlohmann::json &j) {
  HeadConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.dropout = j.at("dropout").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  return c;
}

} // namespace

nlohmann::ordered_json head_to_json(const ClassifierHead &head) {
  nlohmann::ordered_json j;
  j["kind"] = head_kind_name(head.kind());
  j["provider_id"] = head.provider_id();
  j["input_dim"] = head.input_dim();
  j["hidden_dim"] = head.hidden_dim();
  auto order = nlohmann::ordered_json::array();
  for (auto l : kAllLabels)
    order.push_back(label_name(l));
  j["label_order"] = std::move(order);
  nlohmann::ordered_json params;
  if (head.kind() == HeadKind::cn2) {
    params["hidden_w"] = matrix_to_json(head.hidden_w());
    params["hidden_b"] = matrix_to_json(head.hidden_b());
  }
  params["out_w"] = matrix_to_json(head.out_w());
  params["out_b"] = matrix_to_json(head.out_b());
  j["parameters"] = std::move(params);
  return j;
}

ClassifierHead head_from_json(const nlohmann::json &j) {
  try {
    const auto kind = parse_head_kind(j.at("kind").get<std::string>());
    const auto &order = j.at("label_order");
    if (order.size() != kNumLabels)
      throw DataError("checkpoint label order has " + std::to_string(order.size()) + " entries");
    for (std::size_t i = 0; i < kNumLabels; ++i) {
      if (order[i].get<std::string>() != label_name(kAllLabels[i]))
        throw DataError("checkpoint label order differs from the canonical order");
    }
    const auto input_dim = j.at("input_dim").get<std::size_t>();
    const auto hidden_dim = j.value("hidden_dim", std::size_t{0});
    auto head = ClassifierHead::zeros(kind, input_dim, j.at("provider_id").get<std::string>(),
                                      kind == HeadKind::cn2 ? hidden_dim : 256);
    const auto &params = j.at("parameters");
    auto load = [&](const char *name, auto &target) {
      const Eigen::MatrixXd m = matrix_from_json(params.at(name));
      if (m.rows() != target.rows() || m.cols() != target.cols())
        throw DataError(std::string("checkpoint parameter '") + name + "' has the wrong shape");
      target = m;
    };
    if (kind == HeadKind::cn2) {
      load("hidden_w", head.hidden_w());
      load("hidden_b", head.hidden_b());
    }
    load("out_w", head.out_w());
    load("out_b", head.out_b());
    if (!head.all_finite())
      throw DataError("checkpoint contains non-finite parameters");
    return head;
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

nlohmann::ordered_json checkpoints_to_json(const CheckpointSet &set) {
  nlohmann::ordered_json j;
  j["format"] = "intentsynth-checkpoint";
  j["version"] = 1;
  j["optimizer"] = set.optimizer;
  j["config"] = config_to_json(set.config);
  auto list = nlohmann::ordered_json::array();
  for (const auto &cp : set.checkpoints) {
    nlohmann::ordered_json entry;
    entry["epoch"] = cp.epoch;
    entry["val_accuracy"] = cp.val_accuracy ? nlohmann::ordered_json(*cp.val_accuracy) : nullptr;
    entry["train_loss"] = cp.train_loss;
    entry["head"] = head_to_json(cp.head);
    list.push_back(std::move(entry));
  }
  j["checkpoints"] = std::move(list);
  return j;
}

CheckpointSet checkpoints_from_json(const nlohmann::json &j) {
  try {
    if (j.at("format").get<std::string>() != "intentsynth-checkpoint")
      throw DataError("not an intentsynth checkpoint file");
    if (j.at("version").get<int>() != 1)
      throw DataError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    CheckpointSet set;
    set.optimizer = j.value("optimizer", "");
    set.config = config_from_json(j.at("config"));
    int last_epoch = 0;
    for (const auto &entry : j.at("checkpoints")) {
      Checkpoint cp;
      cp.epoch = entry.at("epoch").get<int>();
      if (cp.epoch <= last_epoch)
        throw DataError("checkpoint epochs must be strictly increasing");
      last_epoch = cp.epoch;
      if (!entry.at("val_accuracy").is_null())
        cp.val_accuracy = entry.at("val_accuracy").get<double>();
      cp.train_loss = entry.value("train_loss", 0.0);
      cp.head = head_from_json(entry.at("head"));
      set.checkpoints.push_back(std::move(cp));
    }
    if (set.checkpoints.empty())
      throw DataError("checkpoint file holds no checkpoints");
    return set;
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoints(const CheckpointSet &set, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw DataError("cannot write checkpoint '" + path.string() + "'");
  out << checkpoints_to_json(set).dump() << '\n';
  if (!out)
    throw DataError("I/O error while writing '" + path.string() + "'");
}

CheckpointSet load_checkpoints(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open checkpoint '" + path.string() + "'");
  try {
    return checkpoints_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error &) {
    throw DataError(path.string() + ": checkpoint is not valid JSON");
  }
}

std::vector<FeatureRecord> load_feature_sidecar(const std::filesystem::path &path, std::string provider_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open feature sidecar '" + path.string() + "'");
  std::vector<FeatureRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      const auto j = nlohmann::json::parse(line);
      FeatureRecord rec;
      rec.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      rec.vector.provider_id = provider_id;
      rec.vector.values = j.at("vector").get<std::vector<double>>();
      for (double x : rec.vector.values) {
        if (!std::isfinite(x))
          throw DataError("non-finite feature value");
      }
      if (!out.empty() && rec.vector.dim() != out.front().vector.dim())
        throw DataError("feature dimension changes");
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception &) {
      throw DataError(path.string() + ": malformed feature record at line " + std::to_string(line_no));
    } catch (const DataError &e) {
      throw DataError(path.string() + ": " + e.what() + " at line " + std::to_string(line_no));
    }
  }
  return out;
}

} // namespace intentsynth
