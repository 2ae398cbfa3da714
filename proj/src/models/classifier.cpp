#include "advcf/models/classifier.hpp"

#include <numeric>
#include <string>

#include "advcf/json_util.hpp"

namespace advcf::models {
namespace {

constexpr std::size_t kPredictChunk = 512;

}  // namespace

Classifier::Classifier(std::size_t input_dim, const ClassifierConfig& cfg, std::uint64_t seed) {
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(1);
  Rng rng(seed);
  net_ = Mlp::glorot(std::move(widths), rng);
}

ad::Var Classifier::forward(const ad::Var& batch, std::span<const ad::Var> params) const {
  if (batch.shape().size() != 2 || batch.shape()[1] != input_dim()) {
    throw ad::ShapeError("classifier expects (B x " + std::to_string(input_dim()) + "), got " +
                         ad::shape_str(batch.shape()));
  }
  return ad::sigmoid(mlp_forward(batch, params));
}

ad::Var Classifier::forward(const ad::Var& batch) const {
  const auto params = net_.bind(batch.tape(), false);
  return forward(batch, params);
}

std::vector<double> Classifier::predict(const ad::Tensor& batch) const {
  ad::Tape tape;
  return forward(tape.constant(batch)).value().buffer();
}

std::vector<double> Classifier::predict(const world::Dataset& data) const {
  std::vector<double> out;
  out.reserve(data.size());
  std::vector<const ad::Tensor*> chunk;
  for (std::size_t start = 0; start < data.size(); start += kPredictChunk) {
    chunk.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + kPredictChunk); ++i) chunk.push_back(&data[i].image);
    const auto p = predict(stack_rows(chunk));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

double Classifier::predict_one(const ad::Tensor& image) const {
  const ad::Tensor* one[] = {&image};
  return predict(stack_rows(one)).front();
}

ad::AdamConfig TrainConfig::adam() const {
  ad::AdamConfig a;
  a.learning_rate = learning_rate;
  a.decay = decay;
  return a;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate},
       {"decay", c.decay},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  require_keys(j, {"learning_rate", "decay", "epochs", "batch_size", "seed"}, "train");
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "decay", c.decay);
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "seed", c.seed);
  if (!(c.learning_rate > 0.0) || c.epochs < 1 || c.batch_size == 0) {
    throw ConfigError("train: learning rate must be positive, epochs >= 1, batch size >= 1");
  }
}

std::vector<Example> examples_of(const world::Dataset& data) {
  std::vector<Example> ex;
  ex.reserve(data.size());
  for (const auto& s : data) ex.push_back({&s.image, s.label()});
  return ex;
}

double train_step(Classifier& c, ad::AdamState& opt, const ad::Tensor& batch, const ad::Tensor& labels) {
  ad::Tape tape;
  const auto params = c.net().bind(tape, true);
  const ad::Var loss = ad::bce_loss(c.forward(tape.constant(batch), params), labels);
  const ad::Gradients grads = ad::backward(tape, loss);
  std::vector<ad::Tensor> g;
  g.reserve(params.size());
  for (const auto& p : params) g.push_back(grads.of(p));
  ad::adam_step(c.params(), g, opt);
  return loss.value().item();
}

double train_epoch(Classifier& c, ad::AdamState& opt, std::span<const Example> examples, std::size_t batch_size,
                   Rng& shuffle) {
  if (examples.empty()) throw std::invalid_argument("train_epoch on empty example set");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle.shuffle(std::span(order));

  std::vector<const ad::Tensor*> imgs;
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    imgs.clear();
    ad::Tensor labels({end - start, 1});
    for (std::size_t i = start; i < end; ++i) {
      imgs.push_back(examples[order[i]].image);
      labels[i - start] = examples[order[i]].label;
    }
    total += train_step(c, opt, stack_rows(imgs), labels);
    ++batches;
  }
  return total / static_cast<double>(batches);
}

TrainHistory pretrain_classifier(Classifier& c, const world::Dataset& train, const TrainConfig& cfg) {
  if (train.empty()) throw std::invalid_argument("pretraining needs a non-empty training set");
  const auto examples = examples_of(train);
  ad::AdamState opt(cfg.adam());
  Rng shuffle(derive_seed(cfg.seed, "shuffle"));
  TrainHistory h;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    try {
      h.epoch_loss.push_back(train_epoch(c, opt, examples, cfg.batch_size, shuffle));
    } catch (const ad::NonFiniteError& e) {
      throw ad::NonFiniteError("pretraining diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
  }
  return h;
}

std::vector<double> per_sample_loss(const Classifier& c, std::span<const Example> examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  std::vector<const ad::Tensor*> chunk;
  for (std::size_t start = 0; start < examples.size(); start += kPredictChunk) {
    const std::size_t end = std::min(examples.size(), start + kPredictChunk);
    chunk.clear();
    for (std::size_t i = start; i < end; ++i) chunk.push_back(examples[i].image);
    const auto p = c.predict(stack_rows(chunk));
    for (std::size_t i = start; i < end; ++i) out.push_back(ad::bce_value(p[i - start], examples[i].label));
  }
  return out;
}

double mean_loss(const Classifier& c, std::span<const Example> examples) {
  const auto l = per_sample_loss(c, examples);
  return std::accumulate(l.begin(), l.end(), 0.0) / static_cast<double>(l.size());
}

metrics::MetricsReport evaluate(const Classifier& c, const world::Dataset& data, const metrics::AgeBins& bins) {
  const auto probs = c.predict(data);
  return metrics::group_metrics(metrics::threshold(probs), data, bins);
}

}  // namespace advcf::models
