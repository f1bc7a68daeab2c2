#pragma once

#include <optional>

#include "qst/nn/adam.hpp"
#include "qst/noise.hpp"
#include "qst/states.hpp"

// The convolutional state classifier: dataset recipe, training loop,
// evaluation metrics and Grad-CAM attribution.

namespace qst {

struct LabeledSample {
  std::vector<double> image;  // unit-max normalized, row-major h x w
  int h = 0, w = 0;
  int label = 0;
  StateSpec spec;
};

struct ClassifierConfig {
  int input_h = 32, input_w = 32;
  int n_classes = 7;
  double dropout = 0.4;
  double internal_noise_sigma = 0.005;
  double leaky_slope = 0.3;
  // training
  nn::AdamConfig adam{.lr0 = 0.0002, .beta1 = 0.5, .beta2 = 0.5,
                      .epsilon = 1e-8, .decay = 0.96, .decay_steps = 1000,
                      .schedule = false};
  int batch_size = 32;
  bool augment = true;
  double train_noise_sigma_max = 0.05;  // per-sample sigma ~ U[0, max]
};

/// Graph plus the metadata Grad-CAM and prediction need.
struct Classifier {
  nn::NetworkGraph graph;
  ClassifierConfig config;
  int last_conv_layer = -1;  // index of the final convolution layer
};

// Six convolution layers (32,3,1)(32,3,1)(32,5,2)(64,3,1)(64,3,1)(64,5,2),
// then dense 512, 256, n_classes. LeakyReLU after everything except the
// final layer; the graph outputs logits and softmax is applied at
// prediction time.
Classifier build_classifier(const ClassifierConfig& cfg, std::uint64_t seed);

struct ClassDatasetConfig {
  std::vector<StateFamily> classes{
      StateFamily::Fock,     StateFamily::Coherent, StateFamily::Thermal,
      StateFamily::Num,      StateFamily::Binomial, StateFamily::Cat,
      StateFamily::Gkp};
  int per_class = 600;
  int cutoff = 32;
  int grid_nx = 32, grid_ny = 32;
  double extent = 5.0;
  double mix_sigma_max = 0.5;  // sigma ~ U[0, max], density 0.8
  double mix_density = 0.8;
};

// Uniform per-class parameter sampling, random-state mixing, Husimi on the
// square grid, unit-max normalization.
std::vector<LabeledSample> make_class_dataset(const ClassDatasetConfig& cfg,
                                              std::uint64_t seed);

// One state drawn from the family's documented parameter range.
StateSpec sample_state_spec(StateFamily family, int cutoff, Rng& rng);

struct TrainHistory {
  std::vector<double> loss;      // per epoch
  std::vector<double> accuracy;  // on the training set, post-epoch
};

TrainHistory train_classifier(Classifier& clf,
                              const std::vector<LabeledSample>& dataset,
                              int epochs, std::uint64_t seed);

// Softmax probabilities for one image.
std::vector<double> predict(Classifier& clf, const std::vector<double>& image);

struct EvalReport {
  std::vector<std::vector<double>> confusion;  // rows normalized per true label
  double accuracy = 0.0;
  std::vector<std::optional<double>> auc;  // one-vs-rest; null if class absent
  double macro_auc = 0.0;

  std::string to_json() const;
  std::string confusion_csv() const;
};

EvalReport evaluate(Classifier& clf, const std::vector<LabeledSample>& testset);

// Exact trapezoidal area under the ROC curve over all distinct score
// thresholds. `positive` flags the true positives.
double roc_auc(const std::vector<double>& scores,
               const std::vector<bool>& positive);

struct GradCamResult {
  std::vector<double> heatmap;  // input resolution, values in [0, 1]
  bool degenerate = false;      // all-zero map before normalization
};

// Gradient of the target-class logit w.r.t. the last convolution layer,
// spatially averaged into channel weights; rectified weighted activation
// sum, bilinearly upsampled and min-max normalized.
GradCamResult grad_cam(Classifier& clf, const std::vector<double>& image,
                       int target_class);

// Mean cross-entropy between one-hot labels and softmax(logits); also
// returns d loss / d logits.
double softmax_cross_entropy(const nn::Tensor& logits,
                             const std::vector<int>& labels,
                             nn::Tensor* grad_out = nullptr);

}  // namespace qst
