#include "qst/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qst/kernels.hpp"
#include "qst/measure.hpp"

namespace qst {

using nn::Mode;
using nn::Padding;
using nn::Tensor;

Classifier build_classifier(const ClassifierConfig& cfg, std::uint64_t seed) {
  require(cfg.input_h >= 16 && cfg.input_w >= 16, ErrorCode::InvalidArgument,
          "classifier input must be at least 16x16 for the valid-padding "
          "convolution chain");
  Classifier clf;
  clf.config = cfg;
  auto& g = clf.graph;
  const double slope = cfg.leaky_slope;
  auto conv = [&](int f, int k, int s, Padding p) {
    g.add(std::make_unique<nn::Conv2D>(f, k, s, p));
    g.add(std::make_unique<nn::LeakyReLU>(slope));
  };
  conv(32, 3, 1, Padding::Valid);
  conv(32, 3, 1, Padding::Valid);
  g.add(std::make_unique<nn::GaussianNoiseLayer>(cfg.internal_noise_sigma));
  g.add(std::make_unique<nn::Dropout>(cfg.dropout));
  conv(32, 5, 2, Padding::Same);
  conv(64, 3, 1, Padding::Valid);
  conv(64, 3, 1, Padding::Valid);
  g.add(std::make_unique<nn::GaussianNoiseLayer>(cfg.internal_noise_sigma));
  g.add(std::make_unique<nn::Dropout>(cfg.dropout));
  conv(64, 5, 2, Padding::Same);
  clf.last_conv_layer = g.layer_count() - 2;  // the conv before its LeakyReLU
  g.add(std::make_unique<nn::Dropout>(cfg.dropout));
  g.add(std::make_unique<nn::Flatten>());
  g.add(std::make_unique<nn::Dense>(512, true));
  g.add(std::make_unique<nn::LeakyReLU>(slope));
  g.add(std::make_unique<nn::Dropout>(cfg.dropout));
  g.add(std::make_unique<nn::Dense>(256, true));
  g.add(std::make_unique<nn::LeakyReLU>(slope));
  g.add(std::make_unique<nn::Dense>(cfg.n_classes, true));
  g.build({1, cfg.input_h, cfg.input_w, 1}, seed);
  return clf;
}

StateSpec sample_state_spec(StateFamily family, int cutoff, Rng& rng) {
  StateSpec s;
  s.family = family;
  s.cutoff = cutoff;
  auto polar = [&](double lo, double hi) {
    const double r = rng.uniform(lo, hi);
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    return cxd(r * std::cos(phi), r * std::sin(phi));
  };
  switch (family) {
    case StateFamily::Fock:
      s.n = 1 + static_cast<int>(rng.below(16));
      break;
    case StateFamily::Coherent:
      s.alpha = polar(1e-6, 3.0);
      break;
    case StateFamily::Thermal:
      s.n_th = rng.uniform(0.0, 16.0);
      break;
    case StateFamily::Num:
      s.mu = static_cast<int>(rng.below(2));
      break;
    case StateFamily::Binomial: {
      for (;;) {
        s.S = 1 + static_cast<int>(rng.below(10));
        const int n_max = (cutoff - 1) / (s.S + 1) - 1;
        if (n_max >= 2) {
          s.N = 2 + static_cast<int>(rng.below(n_max - 1));
          break;
        }
      }
      s.mu = static_cast<int>(rng.below(2));
      break;
    }
    case StateFamily::Cat:
      s.S = static_cast<int>(rng.below(3));
      s.alpha = polar(1.0, 3.0);
      s.mu = static_cast<int>(rng.below(2));
      break;
    case StateFamily::Gkp:
      s.delta = rng.uniform(0.2, 0.5);
      s.mu = static_cast<int>(rng.below(2));
      break;
    case StateFamily::Random:
      s.density = 0.8;
      s.seed = rng.next_u64();
      break;
  }
  return s;
}

std::vector<LabeledSample> make_class_dataset(const ClassDatasetConfig& cfg,
                                              std::uint64_t seed) {
  require(!cfg.classes.empty() && cfg.per_class > 0, ErrorCode::InvalidArgument,
          "dataset needs classes and counts");
  const auto grid =
      make_square_grid(-cfg.extent, cfg.extent, cfg.grid_nx, cfg.grid_ny);
  Rng master(seed);

  struct Job {
    StateSpec spec;
    double mix_sigma;
    std::uint64_t mix_seed;
    int label;
  };
  std::vector<Job> jobs;
  jobs.reserve(cfg.classes.size() * cfg.per_class);
  for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
    for (int i = 0; i < cfg.per_class; ++i) {
      Job job;
      job.spec = sample_state_spec(cfg.classes[c], cfg.cutoff, master);
      job.mix_sigma = master.uniform(0.0, cfg.mix_sigma_max);
      job.mix_seed = master.next_u64();
      job.label = static_cast<int>(c);
      jobs.push_back(job);
    }
  }

  std::vector<LabeledSample> out(jobs.size());
  kernels::parallel_for(jobs.size(), [&](std::size_t i) {
    const Job& job = jobs[i];
    DensityMatrix rho = job.spec.build();
    if (job.mix_sigma > 0.0)
      rho = mix_random(rho, job.mix_sigma, cfg.mix_density, job.mix_seed);
    const DataVector q = normalize_unit_max(husimi(rho, grid));
    LabeledSample& s = out[i];
    s.image = q.values;
    s.h = cfg.grid_ny;
    s.w = cfg.grid_nx;
    s.label = job.label;
    s.spec = job.spec;
  });
  return out;
}

double softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels,
                             Tensor* grad_out) {
  const int b = logits.shape[0], n = logits.shape[1];
  require(static_cast<int>(labels.size()) == b, ErrorCode::DimensionMismatch,
          "label count mismatch");
  if (grad_out) *grad_out = Tensor(logits.shape);
  double total = 0.0;
  for (int r = 0; r < b; ++r) {
    const double* z = logits.data.data() + std::size_t(r) * n;
    const double mx = *std::max_element(z, z + n);
    double lse = 0.0;
    for (int i = 0; i < n; ++i) lse += std::exp(z[i] - mx);
    lse = mx + std::log(lse);
    total += lse - z[labels[r]];
    if (grad_out) {
      double* g = grad_out->data.data() + std::size_t(r) * n;
      for (int i = 0; i < n; ++i) g[i] = std::exp(z[i] - lse) / b;
      g[labels[r]] -= 1.0 / b;
    }
  }
  return total / b;
}

namespace {

Tensor batch_tensor(const std::vector<LabeledSample>& data,
                    const std::vector<int>& idx, std::size_t begin,
                    std::size_t end, bool augment, double noise_sigma_max,
                    Rng* rng) {
  const int h = data[idx[begin]].h, w = data[idx[begin]].w;
  const int b = static_cast<int>(end - begin);
  Tensor t({b, h, w, 1});
  for (int k = 0; k < b; ++k) {
    const auto& sample = data[idx[begin + k]];
    std::vector<double> img = sample.image;
    if (augment && rng) {
      const AffineParams params = sample_affine_params(h, w, *rng);
      img = affine_augment(img, h, w, params);
      const double sigma = rng->uniform(0.0, noise_sigma_max);
      for (auto& v : img) v += sigma * rng->normal();
    }
    std::copy(img.begin(), img.end(),
              t.data.begin() + std::size_t(k) * h * w);
  }
  return t;
}

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TrainHistory train_classifier(Classifier& clf,
                              const std::vector<LabeledSample>& dataset,
                              int epochs, std::uint64_t seed) {
  require(!dataset.empty(), ErrorCode::InvalidArgument, "empty dataset");
  nn::Adam adam(clf.config.adam);
  Rng master(seed);
  TrainHistory history;
  std::vector<int> idx(dataset.size());
  std::iota(idx.begin(), idx.end(), 0);
  const int bs = clf.config.batch_size;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng erng = master.fork(epoch);
    // Fisher-Yates shuffle
    for (std::size_t i = dataset.size(); i > 1; --i) {
      const std::size_t j = erng.below(i);
      std::swap(idx[i - 1], idx[j]);
    }
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t at = 0; at < dataset.size(); at += bs) {
      const std::size_t end = std::min(at + bs, dataset.size());
      const Tensor input =
          batch_tensor(dataset, idx, at, end, clf.config.augment,
                       clf.config.train_noise_sigma_max, &erng);
      std::vector<int> labels;
      for (std::size_t k = at; k < end; ++k)
        labels.push_back(dataset[idx[k]].label);
      clf.graph.zero_grads();
      const Tensor logits = clf.graph.forward(input, Mode::Train, &erng);
      Tensor grad;
      const double loss = softmax_cross_entropy(logits, labels, &grad);
      require(std::isfinite(loss), ErrorCode::NumericalFailure,
              "training loss diverged");
      clf.graph.backward(grad);
      adam.step(clf.graph);
      epoch_loss += loss;
      ++batches;
    }
    history.loss.push_back(epoch_loss / batches);

    int correct = 0;
    for (const auto& sample : dataset)
      if (argmax(predict(clf, sample.image)) == sample.label) ++correct;
    history.accuracy.push_back(double(correct) / dataset.size());
  }
  return history;
}

std::vector<double> predict(Classifier& clf, const std::vector<double>& image) {
  const int h = clf.config.input_h, w = clf.config.input_w;
  require(static_cast<int>(image.size()) == h * w, ErrorCode::ShapeError,
          "image size does not match the classifier input");
  Tensor input({1, h, w, 1});
  std::copy(image.begin(), image.end(), input.data.begin());
  const Tensor logits = clf.graph.forward(input, Mode::Eval);
  nn::Softmax softmax;
  const Tensor probs = softmax.forward(logits, Mode::Eval, nullptr);
  return probs.data;
}

double roc_auc(const std::vector<double>& scores,
               const std::vector<bool>& positive) {
  require(scores.size() == positive.size(), ErrorCode::DimensionMismatch,
          "score/label size mismatch");
  std::size_t pos = 0;
  for (bool p : positive) pos += p;
  const std::size_t neg = scores.size() - pos;
  require(pos > 0 && neg > 0, ErrorCode::InvalidArgument,
          "ROC needs both classes present");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  // sweep thresholds; ties advance together (trapezoid between vertices)
  double auc = 0.0;
  double tp = 0, fp = 0, prev_tp = 0, prev_fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      if (positive[order[i]])
        ++tp;
      else
        ++fp;
      ++i;
    }
    auc += (fp - prev_fp) * (tp + prev_tp) / 2.0;
    prev_tp = tp;
    prev_fp = fp;
  }
  return auc / (double(pos) * double(neg));
}

EvalReport evaluate(Classifier& clf,
                    const std::vector<LabeledSample>& testset) {
  require(!testset.empty(), ErrorCode::InvalidArgument, "empty test set");
  const int n = clf.config.n_classes;
  EvalReport report;
  report.confusion.assign(n, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> all_probs;
  all_probs.reserve(testset.size());
  int correct = 0;
  for (const auto& sample : testset) {
    const auto probs = predict(clf, sample.image);
    all_probs.push_back(probs);
    const int pred = argmax(probs);
    report.confusion[sample.label][pred] += 1.0;
    if (pred == sample.label) ++correct;
  }
  report.accuracy = double(correct) / testset.size();
  for (auto& row : report.confusion) {
    const double total = std::accumulate(row.begin(), row.end(), 0.0);
    if (total > 0)
      for (auto& v : row) v /= total;
  }
  report.auc.resize(n);
  double auc_sum = 0.0;
  int auc_count = 0;
  for (int c = 0; c < n; ++c) {
    std::vector<double> scores;
    std::vector<bool> positive;
    bool present = false;
    for (std::size_t i = 0; i < testset.size(); ++i) {
      scores.push_back(all_probs[i][c]);
      positive.push_back(testset[i].label == c);
      present |= testset[i].label == c;
    }
    if (!present || std::all_of(positive.begin(), positive.end(),
                                [](bool p) { return p; })) {
      report.auc[c] = std::nullopt;
      continue;
    }
    report.auc[c] = roc_auc(scores, positive);
    auc_sum += *report.auc[c];
    ++auc_count;
  }
  report.macro_auc = auc_count > 0 ? auc_sum / auc_count : 0.0;
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["accuracy"] = accuracy;
  j["macro_auc"] = macro_auc;
  nlohmann::json aucs = nlohmann::json::array();
  for (const auto& a : auc) {
    if (a)
      aucs.push_back(*a);
    else
      aucs.push_back(nullptr);
  }
  j["auc"] = aucs;
  j["confusion"] = confusion;
  return j.dump(2);
}

std::string EvalReport::confusion_csv() const {
  std::ostringstream out;
  for (const auto& row : confusion) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << format_double(row[i]);
    }
    out << '\n';
  }
  return out.str();
}

namespace {

// Corner-aligned bilinear upsampling of a single-channel map.
std::vector<double> upsample_bilinear(const std::vector<double>& src, int sh,
                                      int sw, int dh, int dw) {
  std::vector<double> dst(std::size_t(dh) * dw);
  for (int y = 0; y < dh; ++y) {
    const double sy = dh > 1 ? double(y) * (sh - 1) / (dh - 1) : 0.0;
    const int y0 = std::min(static_cast<int>(sy), sh - 1);
    const int y1 = std::min(y0 + 1, sh - 1);
    const double fy = sy - y0;
    for (int x = 0; x < dw; ++x) {
      const double sx = dw > 1 ? double(x) * (sw - 1) / (dw - 1) : 0.0;
      const int x0 = std::min(static_cast<int>(sx), sw - 1);
      const int x1 = std::min(x0 + 1, sw - 1);
      const double fx = sx - x0;
      dst[std::size_t(y) * dw + x] =
          (1 - fy) * ((1 - fx) * src[y0 * sw + x0] + fx * src[y0 * sw + x1]) +
          fy * ((1 - fx) * src[y1 * sw + x0] + fx * src[y1 * sw + x1]);
    }
  }
  return dst;
}

}  // namespace

GradCamResult grad_cam(Classifier& clf, const std::vector<double>& image,
                       int target_class) {
  require(target_class >= 0 && target_class < clf.config.n_classes,
          ErrorCode::InvalidArgument, "bad target class");
  const int h = clf.config.input_h, w = clf.config.input_w;
  require(static_cast<int>(image.size()) == h * w, ErrorCode::ShapeError,
          "image size does not match the classifier input");
  Tensor input({1, h, w, 1});
  std::copy(image.begin(), image.end(), input.data.begin());

  // Forward (caches activations), then the pre-softmax score gradient down
  // to the last convolution layer's output.
  const Tensor logits = clf.graph.forward(input, Mode::Eval);
  Tensor seed(logits.shape);
  seed.data[target_class] = 1.0;
  clf.graph.zero_grads();
  const int stop = clf.last_conv_layer + 1;
  Tensor grad = seed;
  for (int l = clf.graph.layer_count() - 1; l >= stop; --l)
    grad = clf.graph.layer(l).backward(grad);

  const Tensor acts =
      clf.graph.forward_prefix(input, stop, Mode::Eval, nullptr);
  const int ah = acts.shape[1], aw = acts.shape[2], ac = acts.shape[3];

  // channel weights = spatially averaged gradients
  std::vector<double> weights(ac, 0.0);
  for (int i = 0; i < ah * aw; ++i)
    for (int c = 0; c < ac; ++c)
      weights[c] += grad.data[std::size_t(i) * ac + c];
  for (auto& v : weights) v /= ah * aw;

  std::vector<double> map(std::size_t(ah) * aw, 0.0);
  for (int i = 0; i < ah * aw; ++i) {
    double acc = 0.0;
    for (int c = 0; c < ac; ++c)
      acc += weights[c] * acts.data[std::size_t(i) * ac + c];
    map[i] = std::max(acc, 0.0);
  }

  GradCamResult result;
  result.heatmap = upsample_bilinear(map, ah, aw, h, w);
  double lo = result.heatmap[0], hi = result.heatmap[0];
  for (double v : result.heatmap) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-300) {
    result.degenerate = true;
    std::fill(result.heatmap.begin(), result.heatmap.end(), 0.0);
    return result;
  }
  for (double& v : result.heatmap) v = (v - lo) / (hi - lo);
  return result;
}

}  // namespace qst
