#pragma once

// Bag-of-embeddings classifier:
//
//   tokens -> mean of non-pad embedding rows -> [dense + ReLU] x L -> dense -> scores
//
// The last ReLU activation is the feature vector handed to graph
// construction. Gradients are derived by hand; training uses Adam.

#include "lpssl/corpus.hpp"
#include "lpssl/dense.hpp"
#include "lpssl/diffusion.hpp"
#include "lpssl/embeddings.hpp"
#include "lpssl/error.hpp"
#include "lpssl/graph.hpp"
#include "lpssl/metrics.hpp"
#include "lpssl/random.hpp"

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace lpssl {

template <typename Scalar>
struct DenseLayer {
  DenseRows<Scalar> weights;  // in x out
  RowVector<Scalar> bias;     // 1 x out

  Eigen::Index in() const noexcept { return weights.rows(); }
  Eigen::Index out() const noexcept { return weights.cols(); }
};

template <typename Scalar>
struct ClassifierParams {
  DenseRows<Scalar> embedding;
  std::vector<DenseLayer<Scalar>> hidden;
  DenseLayer<Scalar> output;
  bool finetune_embeddings = true;

  Eigen::Index vocab_size() const noexcept { return embedding.rows(); }
  Eigen::Index embed_dim() const noexcept { return embedding.cols(); }
  Eigen::Index hidden_dim() const noexcept { return hidden.empty() ? embed_dim() : hidden.back().out(); }
  Eigen::Index num_classes() const noexcept { return output.out(); }

  bool all_finite() const {
    if (!embedding.allFinite() || !output.weights.allFinite() || !output.bias.allFinite()) return false;
    for (const auto& layer : hidden)
      if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
    return true;
  }

  template <typename Other>
  ClassifierParams<Other> cast() const {
    ClassifierParams<Other> out;
    out.embedding = embedding.template cast<Other>();
    for (const auto& layer : hidden)
      out.hidden.push_back({layer.weights.template cast<Other>(), layer.bias.template cast<Other>()});
    out.output = {output.weights.template cast<Other>(), output.bias.template cast<Other>()};
    out.finetune_embeddings = finetune_embeddings;
    return out;
  }
};

namespace detail {

template <typename Scalar>
void init_uniform(DenseRows<Scalar>& m, double limit, Rng& rng) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<Scalar>(uniform(rng, -limit, limit));
}

}  // namespace detail

/// He-uniform hidden layers, Glorot-uniform output layer, zero biases.
template <typename Scalar>
DenseLayer<Scalar> make_output_layer(Eigen::Index in, Eigen::Index classes, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "output-layer"));
  DenseLayer<Scalar> layer{DenseRows<Scalar>(in, classes), RowVector<Scalar>::Zero(classes)};
  detail::init_uniform(layer.weights, std::sqrt(6.0 / static_cast<double>(in + classes)), rng);
  return layer;
}

template <typename Scalar>
ClassifierParams<Scalar> init_classifier(const EmbeddingTable& table, Eigen::Index hidden_dim, int hidden_layers,
                                         int num_classes, std::uint64_t seed, bool finetune_embeddings = true) {
  if (hidden_dim < 1 || hidden_layers < 1 || num_classes < 2)
    throw Error(ErrorKind::InvalidConfig, "classifier needs hidden_dim >= 1, hidden_layers >= 1, classes >= 2");
  ClassifierParams<Scalar> p;
  p.embedding = table.matrix.cast<Scalar>();
  p.finetune_embeddings = finetune_embeddings;
  Rng rng(derive_seed(seed, "hidden-layers"));
  Eigen::Index in = p.embed_dim();
  for (int l = 0; l < hidden_layers; ++l) {
    DenseLayer<Scalar> layer{DenseRows<Scalar>(in, hidden_dim), RowVector<Scalar>::Zero(hidden_dim)};
    detail::init_uniform(layer.weights, std::sqrt(6.0 / static_cast<double>(in)), rng);
    p.hidden.push_back(std::move(layer));
    in = hidden_dim;
  }
  p.output = make_output_layer<Scalar>(in, num_classes, seed);
  return p;
}

/// Replaces the classification head with a freshly initialized one.
template <typename Scalar>
void reset_output_layer(ClassifierParams<Scalar>& params, std::uint64_t seed) {
  params.output = make_output_layer<Scalar>(params.hidden_dim(), params.num_classes(), seed);
}

template <typename Scalar>
struct ForwardPass {
  DenseRows<Scalar> pooled;
  std::vector<Eigen::Index> token_counts;
  std::vector<DenseRows<Scalar>> pre;         // per hidden layer, before ReLU
  std::vector<DenseRows<Scalar>> activations; // per hidden layer, after ReLU
  DenseRows<Scalar> scores;

  const DenseRows<Scalar>& hidden() const { return activations.back(); }
};

template <typename Scalar>
ForwardPass<Scalar> forward(const ClassifierParams<Scalar>& params, const TokenMatrix& batch) {
  ForwardPass<Scalar> f;
  const Eigen::Index b = batch.rows();
  f.pooled = DenseRows<Scalar>::Zero(b, params.embed_dim());
  f.token_counts.assign(static_cast<std::size_t>(b), 0);
  for (Eigen::Index i = 0; i < b; ++i) {
    Eigen::Index count = 0;
    for (Eigen::Index t = 0; t < batch.cols(); ++t) {
      const auto id = batch(i, t);
      if (id == Vocabulary::pad_id) continue;
      if (id < 0 || id >= params.vocab_size())
        throw Error(ErrorKind::DimensionMismatch,
                    "token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(params.vocab_size()));
      f.pooled.row(i) += params.embedding.row(id);
      ++count;
    }
    if (count > 0) f.pooled.row(i) /= static_cast<Scalar>(count);
    f.token_counts[static_cast<std::size_t>(i)] = count;
  }

  const DenseRows<Scalar>* input = &f.pooled;
  for (const auto& layer : params.hidden) {
    DenseRows<Scalar> z = (*input) * layer.weights;
    z.rowwise() += layer.bias;
    f.activations.push_back(z.cwiseMax(Scalar(0)));
    f.pre.push_back(std::move(z));
    input = &f.activations.back();
  }
  f.scores = (*input) * params.output.weights;
  f.scores.rowwise() += params.output.bias;
  return f;
}

template <typename Scalar>
DenseRows<Scalar> softmax_rows(const DenseRows<Scalar>& scores) {
  DenseRows<Scalar> p(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    p.row(i) = (scores.row(i).array() - scores.row(i).maxCoeff()).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

/// mean_i omega_i * zeta[y_i] * CE(softmax(scores_i), y_i)
template <typename Scalar>
Scalar weighted_loss(const DenseRows<Scalar>& scores, std::span<const int> targets, std::span<const Scalar> omega,
                     std::span<const Scalar> zeta) {
  const Eigen::Index b = scores.rows();
  if (b == 0) return Scalar(0);
  Scalar total(0);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto y = targets[static_cast<std::size_t>(i)];
    const Scalar w = omega[static_cast<std::size_t>(i)] * zeta[static_cast<std::size_t>(y)];
    if (w == Scalar(0)) continue;
    const Scalar m = scores.row(i).maxCoeff();
    const Scalar lse = m + std::log((scores.row(i).array() - m).exp().sum());
    total += w * (lse - scores(i, y));
  }
  return total / static_cast<Scalar>(b);
}

/// d weighted_loss / d scores.
template <typename Scalar>
DenseRows<Scalar> weighted_loss_gradient(const DenseRows<Scalar>& scores, std::span<const int> targets,
                                         std::span<const Scalar> omega, std::span<const Scalar> zeta) {
  DenseRows<Scalar> g = softmax_rows(scores);
  const Eigen::Index b = scores.rows();
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto y = targets[static_cast<std::size_t>(i)];
    g(i, y) -= Scalar(1);
    g.row(i) *= omega[static_cast<std::size_t>(i)] * zeta[static_cast<std::size_t>(y)] / static_cast<Scalar>(b);
  }
  return g;
}

template <typename Scalar>
struct Gradients {
  DenseRows<Scalar> embedding;  // empty unless embeddings are fine-tuned
  std::vector<DenseLayer<Scalar>> hidden;
  DenseLayer<Scalar> output;
};

template <typename Scalar>
Gradients<Scalar> backward(const ClassifierParams<Scalar>& params, const TokenMatrix& batch,
                           const ForwardPass<Scalar>& f, const DenseRows<Scalar>& d_scores) {
  Gradients<Scalar> g;
  const auto layers = params.hidden.size();
  const DenseRows<Scalar>& last = layers ? f.activations.back() : f.pooled;
  g.output.weights = last.transpose() * d_scores;
  g.output.bias = d_scores.colwise().sum();
  DenseRows<Scalar> d_act = d_scores * params.output.weights.transpose();

  g.hidden.resize(layers);
  for (std::size_t l = layers; l-- > 0;) {
    DenseRows<Scalar> d_pre = d_act.cwiseProduct((f.pre[l].array() > Scalar(0)).template cast<Scalar>().matrix());
    const DenseRows<Scalar>& input = l ? f.activations[l - 1] : f.pooled;
    g.hidden[l].weights = input.transpose() * d_pre;
    g.hidden[l].bias = d_pre.colwise().sum();
    d_act = d_pre * params.hidden[l].weights.transpose();
  }

  if (params.finetune_embeddings) {
    g.embedding = DenseRows<Scalar>::Zero(params.vocab_size(), params.embed_dim());
    for (Eigen::Index i = 0; i < batch.rows(); ++i) {
      const auto count = f.token_counts[static_cast<std::size_t>(i)];
      if (count == 0) continue;
      const RowVector<Scalar> share = d_act.row(i) / static_cast<Scalar>(count);
      for (Eigen::Index t = 0; t < batch.cols(); ++t) {
        const auto id = batch(i, t);
        if (id != Vocabulary::pad_id) g.embedding.row(id) += share;
      }
    }
  }
  return g;
}

/// Flat views over every trainable block, in a fixed order shared by
/// parameters and gradients.
template <typename Scalar>
using BlockView = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;

template <typename Scalar, typename Matrix>
BlockView<Scalar> view_of(Matrix& m) {
  return BlockView<Scalar>(m.data(), m.size());
}

template <typename Scalar>
std::vector<BlockView<Scalar>> trainable_blocks(ClassifierParams<Scalar>& p) {
  std::vector<BlockView<Scalar>> v;
  if (p.finetune_embeddings) v.push_back(view_of<Scalar>(p.embedding));
  for (auto& layer : p.hidden) {
    v.push_back(view_of<Scalar>(layer.weights));
    v.push_back(view_of<Scalar>(layer.bias));
  }
  v.push_back(view_of<Scalar>(p.output.weights));
  v.push_back(view_of<Scalar>(p.output.bias));
  return v;
}

template <typename Scalar>
std::vector<BlockView<Scalar>> gradient_blocks(Gradients<Scalar>& g) {
  std::vector<BlockView<Scalar>> v;
  if (g.embedding.size()) v.push_back(view_of<Scalar>(g.embedding));
  for (auto& layer : g.hidden) {
    v.push_back(view_of<Scalar>(layer.weights));
    v.push_back(view_of<Scalar>(layer.bias));
  }
  v.push_back(view_of<Scalar>(g.output.weights));
  v.push_back(view_of<Scalar>(g.output.bias));
  return v;
}

enum class Weighting { None, CertaintyAndClass };

struct TrainConfig {
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  Weighting weighting = Weighting::None;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (epochs < 1) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 1");
    if (batch_size < 1) throw Error(ErrorKind::InvalidConfig, "batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw Error(ErrorKind::InvalidConfig, "learning_rate must be >= 0");
  }
};

template <typename Scalar>
class Adam {
 public:
  Adam(ClassifierParams<Scalar>& params, const TrainConfig& cfg) : cfg_(cfg) {
    for (auto& block : trainable_blocks(params)) {
      m_.push_back(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(block.size()));
      v_.push_back(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(block.size()));
    }
  }

  void step(ClassifierParams<Scalar>& params, Gradients<Scalar>& grads) {
    ++t_;
    const auto b1 = static_cast<Scalar>(cfg_.beta1);
    const auto b2 = static_cast<Scalar>(cfg_.beta2);
    const auto lr = static_cast<Scalar>(cfg_.learning_rate);
    const auto eps = static_cast<Scalar>(cfg_.epsilon);
    const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(t_));
    auto theta = trainable_blocks(params);
    auto grad = gradient_blocks(grads);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m_[k] = b1 * m_[k] + (Scalar(1) - b1) * grad[k];
      v_[k] = b2 * v_[k] + (Scalar(1) - b2) * grad[k].cwiseAbs2();
      theta[k].array() -= lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps);
    }
  }

 private:
  TrainConfig cfg_;
  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> m_, v_;
  long t_ = 0;
};

/// Rows, targets and weights a training run iterates over.
struct TrainingTargets {
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  std::vector<double> omega;
  std::vector<double> zeta;
};

/// Labeled rows with gold labels when `pseudo` is null; otherwise every row
/// with its pseudo-label, weighted by certainty and class weight unless
/// weighting is None.
inline TrainingTargets make_targets(const IndexedDataset& dataset, const PseudoLabelSet* pseudo, Weighting weighting) {
  TrainingTargets t;
  t.zeta.assign(static_cast<std::size_t>(dataset.num_classes), 1.0);
  if (!pseudo) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (!dataset.labeled_mask[i]) continue;
      t.rows.push_back(i);
      t.labels.push_back(dataset.gold_labels[i]);
      t.omega.push_back(1.0);
    }
    return t;
  }
  if (pseudo->size() != dataset.size())
    throw Error(ErrorKind::DimensionMismatch, "pseudo-labels cover " + std::to_string(pseudo->size()) + " of " +
                                                  std::to_string(dataset.size()) + " training points");
  t.rows.resize(dataset.size());
  std::iota(t.rows.begin(), t.rows.end(), std::size_t{0});
  t.labels = pseudo->labels;
  if (weighting == Weighting::CertaintyAndClass) {
    t.omega = pseudo->certainty;
    t.zeta = pseudo->class_weights;
  } else {
    t.omega.assign(dataset.size(), 1.0);
  }
  return t;
}

inline TokenMatrix gather_rows(const TokenMatrix& tokens, std::span<const std::size_t> rows) {
  TokenMatrix out(static_cast<Eigen::Index>(rows.size()), tokens.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = tokens.row(static_cast<Eigen::Index>(rows[r]));
  return out;
}

/// Minibatch Adam over `make_targets(dataset, pseudo, cfg.weighting)`.
/// Returns the mean weighted loss of every epoch.
template <typename Scalar>
std::vector<double> train(ClassifierParams<Scalar>& params, const IndexedDataset& dataset,
                          const PseudoLabelSet* pseudo, const TrainConfig& cfg) {
  cfg.validate();
  const TrainingTargets targets = make_targets(dataset, pseudo, cfg.weighting);
  if (targets.rows.empty()) throw Error(ErrorKind::NoLabeledPoints, "no training rows");

  std::vector<Scalar> zeta(targets.zeta.begin(), targets.zeta.end());
  Adam<Scalar> optimizer(params, cfg);
  Rng rng(derive_seed(cfg.seed, "minibatch-order"));
  std::vector<std::size_t> order(targets.rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> curve;
  std::vector<std::size_t> batch_rows;
  std::vector<int> batch_labels;
  std::vector<Scalar> batch_omega;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch_rows.clear();
      batch_labels.clear();
      batch_omega.clear();
      for (std::size_t r = start; r < end; ++r) {
        batch_rows.push_back(targets.rows[order[r]]);
        batch_labels.push_back(targets.labels[order[r]]);
        batch_omega.push_back(static_cast<Scalar>(targets.omega[order[r]]));
      }
      const TokenMatrix batch = gather_rows(dataset.sequences, batch_rows);
      const auto f = forward(params, batch);
      const Scalar loss = weighted_loss<Scalar>(f.scores, batch_labels, batch_omega, zeta);
      if (!std::isfinite(static_cast<double>(loss)))
        throw Error(ErrorKind::DivergedLoss, "non-finite loss in epoch " + std::to_string(epoch + 1));
      epoch_loss += static_cast<double>(loss) * static_cast<double>(end - start);
      auto grads = backward(params, batch, f, weighted_loss_gradient<Scalar>(f.scores, batch_labels, batch_omega, zeta));
      optimizer.step(params, grads);
    }
    if (!params.all_finite())
      throw Error(ErrorKind::DivergedLoss, "non-finite parameters after epoch " + std::to_string(epoch + 1));
    curve.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return curve;
}

template <typename Scalar, typename Fn>
void for_each_batch(const IndexedDataset& dataset, Eigen::Index batch_size, Fn&& fn) {
  const auto n = static_cast<Eigen::Index>(dataset.size());
  for (Eigen::Index start = 0; start < n; start += batch_size) {
    const Eigen::Index rows = std::min(batch_size, n - start);
    const TokenMatrix batch = dataset.sequences.middleRows(start, rows);
    fn(start, batch);
  }
}

/// Class scores for every row of `dataset`.
template <typename Scalar>
DenseRows<Scalar> predict_scores(const ClassifierParams<Scalar>& params, const IndexedDataset& dataset) {
  DenseRows<Scalar> scores(static_cast<Eigen::Index>(dataset.size()), params.num_classes());
  for_each_batch<Scalar>(dataset, 256, [&](Eigen::Index start, const TokenMatrix& batch) {
    scores.middleRows(start, batch.rows()) = forward(params, batch).scores;
  });
  return scores;
}

/// Penultimate (last hidden) activations for every row, in dataset order.
template <typename Scalar>
FeatureMatrix<Scalar> extract_features(const ClassifierParams<Scalar>& params, const IndexedDataset& dataset) {
  FeatureMatrix<Scalar> out;
  out.values.resize(static_cast<Eigen::Index>(dataset.size()), params.hidden_dim());
  for_each_batch<Scalar>(dataset, 256, [&](Eigen::Index start, const TokenMatrix& batch) {
    const auto f = forward(params, batch);
    out.values.middleRows(start, batch.rows()) = params.hidden.empty() ? f.pooled : f.hidden();
  });
  return out;
}

template <typename Scalar>
MetricsReport evaluate(const ClassifierParams<Scalar>& params, const IndexedDataset& dataset) {
  const DenseRows<double> scores = predict_scores(params, dataset).template cast<double>();
  return compute_metrics(scores, dataset.gold_labels, dataset.num_classes);
}

}  // namespace lpssl
