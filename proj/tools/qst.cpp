// qst: command-line surface over the tomography engine.
//
// Subcommands: generate, measure, noise, classify (train/eval/gradcam),
// reconstruct, benchmark. Exit codes: 0 success, 2 configuration error,
// 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qst/dataset.hpp"
#include "qst/nn/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace qst;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot open " + path);
  out << text;
}

DensityMatrix load_state(const std::string& spec_path,
                         const std::string& rho_path) {
  require(spec_path.empty() != rho_path.empty(), ErrorCode::ConfigError,
          "provide exactly one of --spec / --rho");
  if (!spec_path.empty()) return StateSpec::from_json(slurp(spec_path)).build();
  return DensityMatrix::from_json(slurp(rho_path));
}

int label_for_class(const std::vector<std::string>& classes,
                    const std::string& name) {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == name) return static_cast<int>(i);
  fail(ErrorCode::ConfigError, "class '" + name + "' not in the model");
}

struct ClassifierSidecar {
  ClassifierConfig config;
  std::vector<std::string> classes;

  std::string to_json() const {
    nlohmann::json j;
    j["input_h"] = config.input_h;
    j["input_w"] = config.input_w;
    j["n_classes"] = config.n_classes;
    j["classes"] = classes;
    return j.dump(2);
  }
  static ClassifierSidecar from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ClassifierSidecar s;
    s.config.input_h = j.at("input_h").get<int>();
    s.config.input_w = j.at("input_w").get<int>();
    s.config.n_classes = j.at("n_classes").get<int>();
    for (const auto& c : j.at("classes")) s.classes.push_back(c);
    return s;
  }
};

Classifier load_classifier(const std::string& model_path,
                           std::vector<std::string>* classes) {
  const auto sidecar = ClassifierSidecar::from_json(slurp(model_path + ".json"));
  Classifier clf = build_classifier(sidecar.config, 0);
  nn::load_checkpoint(model_path, clf.graph);
  if (classes) *classes = sidecar.classes;
  return clf;
}

int run(int argc, char** argv) {
  CLI::App app{"continuous-variable quantum state tomography toolkit"};
  app.require_subcommand(1);

  std::uint64_t global_seed = 1;
  int global_cutoff = 32;
  app.add_option("--seed", global_seed, "global RNG seed")->capture_default_str();
  app.add_option("--cutoff", global_cutoff, "Fock-space cutoff")
      ->capture_default_str();

  // --- generate ---
  auto* generate = app.add_subcommand("generate", "sample a labeled dataset");
  std::string gen_config, gen_out = "dataset";
  generate->add_option("--config", gen_config, "JSON config")->required();
  generate->add_option("--out", gen_out, "output directory");

  // --- measure ---
  auto* measure = app.add_subcommand("measure", "phase-space data for a state");
  std::string m_spec, m_rho, m_kind = "husimi", m_grid, m_out = "data.csv",
              m_pgm;
  measure->add_option("--spec", m_spec, "StateSpec JSON file");
  measure->add_option("--rho", m_rho, "density-matrix JSON file");
  measure->add_option("--kind", m_kind, "husimi | q:<n> | wigner");
  measure->add_option("--grid", m_grid, "grid JSON file (default 32x32 [-5,5])");
  measure->add_option("--out", m_out, "output CSV");
  measure->add_option("--pgm", m_pgm, "also write a PGM heatmap here");

  // --- noise ---
  auto* noise = app.add_subcommand("noise", "apply a corruption channel");
  std::string n_spec, n_in, n_rho, n_out = "noisy";
  noise->add_option("--noise", n_spec, "NoiseSpec JSON file")->required();
  noise->add_option("--in", n_in, "data CSV (data-level channels)");
  noise->add_option("--rho", n_rho, "density-matrix JSON (state channels)");
  noise->add_option("--out", n_out, "output path (CSV or JSON)");

  // --- classify ---
  auto* classify = app.add_subcommand("classify", "train / evaluate / inspect");
  classify->require_subcommand(1);
  auto* cls_train = classify->add_subcommand("train");
  std::string ct_config, ct_out = "model.ckpt";
  cls_train->add_option("--config", ct_config, "JSON config")->required();
  cls_train->add_option("--out", ct_out, "checkpoint path");
  auto* cls_eval = classify->add_subcommand("eval");
  std::string ce_model, ce_data, ce_metrics, ce_confusion;
  cls_eval->add_option("--model", ce_model)->required();
  cls_eval->add_option("--data", ce_data, "dataset manifest")->required();
  cls_eval->add_option("--metrics", ce_metrics, "metrics JSON output path");
  cls_eval->add_option("--confusion", ce_confusion, "confusion CSV path");
  auto* cls_cam = classify->add_subcommand("gradcam");
  std::string cg_model, cg_input, cg_class, cg_out = "heat.pgm";
  cls_cam->add_option("--model", cg_model)->required();
  cls_cam->add_option("--input", cg_input, "sample CSV")->required();
  cls_cam->add_option("--class", cg_class, "target class name")->required();
  cls_cam->add_option("--out", cg_out, "heatmap PGM path");

  // --- reconstruct ---
  auto* rec = app.add_subcommand("reconstruct", "fit a density matrix to data");
  std::string r_method = "cgan", r_data, r_ops, r_out = "rho.json", r_report,
              r_true;
  double r_lambda = 1.0, r_noise_sigma = -1.0, r_conv_nth = -1.0;
  int r_max_iters = 3000;
  rec->add_option("--method", r_method, "imle | cholesky:<L1|L2|CE|KL> | cgan");
  rec->add_option("--data", r_data, "data CSV")->required();
  rec->add_option("--ops", r_ops, "measurement-set JSON")->required();
  rec->add_option("--lambda-l1", r_lambda, "L1 weight for cgan");
  rec->add_option("--max-iters", r_max_iters, "iteration budget");
  rec->add_option("--noise-sigma", r_noise_sigma, "known additive noise");
  rec->add_option("--conv-nth", r_conv_nth, "known convolution noise");
  rec->add_option("--true", r_true, "true density matrix (fidelity traces)");
  rec->add_option("--out", r_out, "reconstructed density matrix JSON");
  rec->add_option("--report", r_report, "fit report JSON");

  // --- benchmark ---
  auto* bench = app.add_subcommand("benchmark", "paper-style experiment runs");
  std::string b_scenario, b_out = "bench";
  int b_seeds = 3, b_max_iters = 3000, b_imle_iters = 20000, b_cutoff = 16;
  bench->add_option("--scenario", b_scenario,
                    "loss-compare | additive-noise | conv-noise | mixed-rank "
                    "| data-reduction")
      ->required();
  bench->add_option("--out", b_out, "report directory");
  bench->add_option("--seeds", b_seeds, "repetitions per method");
  bench->add_option("--max-iters", b_max_iters);
  bench->add_option("--imle-iters", b_imle_iters);
  bench->add_option("--bench-cutoff", b_cutoff);

  CLI11_PARSE(app, argc, argv);

  if (*generate) {
    const auto rc = RunConfig::load(
        gen_config, {"classes", "per_class", "cutoff", "grid_nx", "grid_ny",
                     "extent", "mix_sigma_max", "mix_density", "seed"});
    GenerateConfig cfg = GenerateConfig::from_run_config(rc);
    if (!rc.has("seed")) cfg.seed = global_seed;
    if (!rc.has("cutoff")) cfg.cutoff = global_cutoff;
    const Manifest manifest = generate_dataset(cfg, gen_out);
    std::cout << "wrote " << manifest.entries.size() << " samples to "
              << gen_out << "\n";
    return 0;
  }

  if (*measure) {
    const DensityMatrix rho = load_state(m_spec, m_rho);
    const PhaseGrid grid = m_grid.empty()
                               ? make_square_grid()
                               : PhaseGrid::from_json(slurp(m_grid));
    DataVector data;
    if (m_kind == "husimi") {
      data = husimi(rho, grid);
    } else if (m_kind == "wigner") {
      data = wigner(rho, grid);
    } else if (m_kind.rfind("q:", 0) == 0) {
      data = generalized_q(rho, grid, std::stoi(m_kind.substr(2)));
    } else {
      fail(ErrorCode::ConfigError, "unknown kind '" + m_kind + "'");
    }
    write_csv(m_out, grid, data);
    if (!m_pgm.empty()) write_pgm(m_pgm, grid, data);
    return 0;
  }

  if (*noise) {
    const NoiseSpec spec = NoiseSpec::from_json(slurp(n_spec));
    const bool state_level =
        spec.kind == NoiseKind::MixRandom || spec.kind == NoiseKind::PhotonLoss;
    if (state_level) {
      require(!n_rho.empty(), ErrorCode::ConfigError,
              "state-level noise needs --rho");
      const DensityMatrix rho = DensityMatrix::from_json(slurp(n_rho));
      const DensityMatrix out =
          spec.kind == NoiseKind::MixRandom
              ? mix_random(rho, spec.sigma, spec.density, spec.seed)
              : photon_loss(rho, spec.fraction);
      spit(n_out, out.to_json());
    } else {
      require(!n_in.empty(), ErrorCode::ConfigError,
              "data-level noise needs --in");
      const GridData gd = read_csv(n_in);
      DataVector out;
      switch (spec.kind) {
        case NoiseKind::AdditiveGaussian:
          out = additive_gaussian(gd.data, spec.sigma_g, spec.seed);
          break;
        case NoiseKind::Pepper:
          out = pepper(gd.data, spec.fraction, spec.seed);
          break;
        case NoiseKind::GaussianConv: {
          // grid metadata is not in the CSV; assume the default square grid
          const int side = static_cast<int>(std::lround(
              std::sqrt(double(gd.data.size()))));
          require(side * side == gd.data.size(), ErrorCode::ConfigError,
                  "convolution noise needs square-grid data");
          double lo = gd.grid.points.front().real(),
                 hi = gd.grid.points.back().real();
          const double spacing = (hi - lo) / (side - 1);
          DataVector conv = gd.data;
          conv.values = gaussian_convolve_image(gd.data.values, side, side,
                                                spacing, spec.n_th);
          out = conv;
          break;
        }
        case NoiseKind::Affine: {
          const int side = static_cast<int>(std::lround(
              std::sqrt(double(gd.data.size()))));
          require(side * side == gd.data.size(), ErrorCode::ConfigError,
                  "affine noise needs square-grid data");
          out = gd.data;
          out.values = affine_augment(gd.data.values, side, side, spec.affine);
          break;
        }
        default:
          fail(ErrorCode::ConfigError, "unsupported data-level noise");
      }
      write_csv(n_out, gd.grid, out);
    }
    return 0;
  }

  if (*cls_train) {
    const auto rc = RunConfig::load(
        ct_config,
        {"classes", "per_class", "test_per_class", "cutoff", "grid_nx",
         "grid_ny", "extent", "mix_sigma_max", "mix_density", "seed", "epochs",
         "batch_size", "lr", "augment"});
    GenerateConfig gen = GenerateConfig::from_run_config(RunConfig::parse(
        "{}", {}));
    (void)gen;
    ClassDatasetConfig dc;
    dc.classes.clear();
    for (const auto& name : rc.strings("classes"))
      dc.classes.push_back(family_from_name(name));
    require(!dc.classes.empty(), ErrorCode::ConfigError,
            "config needs 'classes'");
    dc.per_class = rc.integer("per_class", 600);
    dc.cutoff = rc.integer("cutoff", global_cutoff);
    dc.grid_nx = rc.integer("grid_nx", 32);
    dc.grid_ny = rc.integer("grid_ny", 32);
    dc.extent = rc.number("extent", 5.0);
    dc.mix_sigma_max = rc.number("mix_sigma_max", 0.5);
    dc.mix_density = rc.number("mix_density", 0.8);
    const std::uint64_t seed = rc.seed("seed", global_seed);

    ClassifierConfig cc;
    cc.input_h = dc.grid_ny;
    cc.input_w = dc.grid_nx;
    cc.n_classes = static_cast<int>(dc.classes.size());
    cc.batch_size = rc.integer("batch_size", 32);
    cc.adam.lr0 = rc.number("lr", cc.adam.lr0);
    cc.augment = rc.integer("augment", 1) != 0;

    const auto dataset = make_class_dataset(dc, seed);
    Classifier clf = build_classifier(cc, seed + 1);
    const auto history =
        train_classifier(clf, dataset, rc.integer("epochs", 30), seed + 2);
    nn::save_checkpoint(ct_out, clf.graph);
    ClassifierSidecar sidecar;
    sidecar.config = cc;
    for (const auto& f : dc.classes) sidecar.classes.push_back(family_name(f));
    spit(ct_out + ".json", sidecar.to_json());
    nlohmann::json j;
    j["loss"] = history.loss;
    j["train_accuracy"] = history.accuracy;
    std::cout << j.dump(2) << "\n";
    return 0;
  }

  if (*cls_eval) {
    std::vector<std::string> classes;
    Classifier clf = load_classifier(ce_model, &classes);
    const auto testset = load_dataset(ce_data);
    const auto report = evaluate(clf, testset);
    const std::string metrics = report.to_json();
    if (!ce_metrics.empty())
      spit(ce_metrics, metrics + "\n");
    else
      std::cout << metrics << "\n";
    if (!ce_confusion.empty()) spit(ce_confusion, report.confusion_csv());
    return 0;
  }

  if (*cls_cam) {
    std::vector<std::string> classes;
    Classifier clf = load_classifier(cg_model, &classes);
    const auto gd = read_csv(cg_input);
    const int target = label_for_class(classes, cg_class);
    const auto cam = grad_cam(clf, gd.data.values, target);
    const int side = clf.config.input_w;
    const auto grid = make_square_grid(-5, 5, side, clf.config.input_h);
    DataVector heat;
    heat.values = cam.heatmap;
    write_pgm(cg_out, grid, heat);
    if (cam.degenerate)
      std::cerr << "warning: grad-cam map was all zero before scaling\n";
    return 0;
  }

  if (*rec) {
    const GridData gd = read_csv(r_data);
    auto ops = std::make_shared<MeasurementSet>(
        MeasurementSet::from_json(slurp(r_ops)));
    ReconstructionProblem problem;
    problem.data = gd.data;
    problem.data.normalization = DataVector::Normalization::UnitMax;
    problem.ops = ops;
    problem.cutoff = ops->cutoff;
    if (r_noise_sigma >= 0.0) problem.known_noise_sigma = r_noise_sigma;
    if (r_conv_nth > 0.0) problem.known_conv_nth = r_conv_nth;
    std::optional<DensityMatrix> truth;
    if (!r_true.empty()) truth = DensityMatrix::from_json(slurp(r_true));

    FitReport report;
    if (r_method == "imle") {
      report = imle(problem, r_max_iters, 1e-5, truth);
    } else if (r_method.rfind("cholesky:", 0) == 0) {
      report = cholesky_fit(problem, fit_loss_from_name(r_method.substr(9)),
                            r_max_iters, cholesky_default_adam(), global_seed,
                            truth);
    } else if (r_method == "cgan") {
      CganConfig cfg;
      cfg.lambda_l1 = r_lambda;
      cfg.seed = global_seed;
      report = qst_cgan_fit(problem, cfg, r_max_iters, truth);
    } else {
      fail(ErrorCode::ConfigError, "unknown method '" + r_method + "'");
    }
    spit(r_out, report.state->to_json());
    if (!r_report.empty()) spit(r_report, report.to_json());
    std::cout << "stopped after " << report.iterations << " iterations ("
              << report.stop_reason << ")\n";
    return 0;
  }

  if (*bench) {
    BenchmarkOptions opts;
    opts.seeds = b_seeds;
    opts.max_iters = b_max_iters;
    opts.imle_iters = b_imle_iters;
    opts.cutoff = b_cutoff;
    opts.seed = global_seed;
    run_benchmark(scenario_from_name(b_scenario), opts, b_out);
    std::cout << "report in " << b_out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const bool config = e.code() == ErrorCode::ConfigError ||
                        e.code() == ErrorCode::IoError ||
                        e.code() == ErrorCode::InvalidArgument;
    return config ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
