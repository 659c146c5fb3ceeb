#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "cpdemod/selftest.hpp"

namespace cpdemod::cli {
namespace {

std::string format_set(const PredictionSet& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.members.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(s.members[i]);
  }
  return out + "}";
}

}  // namespace

CliArgs parse_args(int argc, const char* const* argv) {
  CliArgs args;
  ExperimentConfig& cfg = args.config;

  CLI::App app{"Conformal set demodulators over a simulated I/Q-imbalanced fading channel", "cpdemod"};
  app.require_subcommand(0, 1);
  auto* run = app.add_subcommand("run", "Run the coverage/inefficiency experiment and write CSV");
  auto* frame = app.add_subcommand("frame", "Print the prediction sets for one frame");
  auto* selftest = app.add_subcommand("selftest", "Run numerical self-checks");
  for (auto* sub : {run, frame, selftest}) sub->fallthrough();

  std::vector<std::string> methods, learners;
  std::size_t k_folds = kDefaultFolds;
  std::string frame_method = "cv", frame_learner = "frequentist";

  app.add_option("--snr-db", cfg.snr_db, "Signal-to-noise ratio in dB")->capture_default_str();
  app.add_option("--n-pilots", cfg.n_pilots_grid, "Pilot counts N (comma separated)")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  app.add_option("--n-test", cfg.n_test, "Test pairs per frame")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--n-frames", cfg.n_frames, "Frames per cell")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--alpha", cfg.alpha, "Target miscoverage level in (0,1)")->capture_default_str();
  app.add_option("--methods", methods, "Subset of naive,vb,cv,kcv")->delimiter(',');
  app.add_option("--learners", learners, "Subset of frequentist,bayesian")->delimiter(',');
  auto* k_opt = app.add_option("--k", k_folds, "Folds for kcv (default 5, skipping N not divisible by 5)");
  app.add_option("--seed", cfg.master_seed, "Master seed")->capture_default_str();
  app.add_option("--split-ratio", cfg.split_ratio, "Training fraction for vb")->capture_default_str();
  app.add_flag("--alpha-halving", cfg.alpha_halving, "Run cv and kcv at alpha/2");
  app.add_option("--threads", cfg.threads, "Parallel frames (0 = all cores)")->capture_default_str();
  app.add_option("--out", args.out, "CSV output path")->capture_default_str();
  app.add_option("--dat", args.dat, "Also write a whitespace-separated .dat file");

  frame->add_option("--method", frame_method, "naive, vb, cv or kcv")->capture_default_str();
  frame->add_option("--learner", frame_learner, "frequentist or bayesian")->capture_default_str();
  frame->add_option("--frame-index", args.frame_index, "Frame index within the cell")->capture_default_str();
  selftest->add_option("--mutate-quantile-rank", args.mutate_quantile_rank, "Offset the quantile rank (mutation check)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg;
    if (e.get_exit_code() == 0) {
      msg << app.help();
      throw CliExit(0, msg.str());
    }
    msg << "error: " << e.what() << "\n\n" << app.help();
    throw CliExit(e.get_exit_code(), msg.str());
  }

  if (frame->parsed()) args.command = Command::frame;
  if (selftest->parsed()) args.command = Command::selftest;

  try {
    if (!methods.empty()) {
      cfg.methods.clear();
      for (const auto& m : methods) cfg.methods.push_back(parse_method(m));
    }
    if (!learners.empty()) {
      cfg.learners.clear();
      for (const auto& l : learners) cfg.learners.push_back(parse_learner(l));
    }
    if (k_opt->count() > 0) cfg.k_folds = k_folds;
    args.frame_method = parse_method(frame_method);
    args.frame_learner = parse_learner(frame_learner);
    if (const char* env = std::getenv("CONFORMAL_DEMOD_SEED"); env != nullptr && *env != '\0') {
      std::size_t used = 0;
      cfg.master_seed = std::stoull(env, &used);
      if (env[used] != '\0') throw std::invalid_argument("CONFORMAL_DEMOD_SEED is not an integer");
    }
    if (args.command == Command::frame) {
      cfg.n_pilots_grid.resize(1);
      cfg.methods = {args.frame_method};
      cfg.learners = {args.frame_learner};
    }
    cfg.validate();
  } catch (const std::exception& e) {
    throw CliExit(2, std::string("error: ") + e.what() + "\n\n" + app.help());
  }
  return args;
}

int cmd_run(const CliArgs& args, std::ostream& out) {
  const auto records = run_experiment(args.config);
  write_csv(records, args.out);
  if (args.dat) write_dat(records, *args.dat);
  out << format_csv(records);
  return 0;
}

int cmd_frame(const CliArgs& args, std::ostream& out) {
  const ExperimentConfig& cfg = args.config;
  const Method method = args.frame_method;
  const LearnerKind learner = args.frame_learner;
  const std::size_t n = cfg.n_pilots_grid.front();
  const std::size_t k = cfg.k_folds.value_or(kDefaultFolds);
  const Seed seed = frame_seed(cfg.master_seed, method, learner, n, args.frame_index);
  const Frame frame = make_frame(cfg, method, learner, n, args.frame_index);

  const auto predictor = make_set_predictor(frame.pilots, method, cfg.learner(learner), method_alpha(cfg, method), k,
                                            seed, cfg.split_ratio);
  std::vector<ComplexSample> xs;
  for (const auto& t : frame.tests) xs.push_back(t.x);
  const auto sets = predictor(xs);

  out << std::fixed << std::setprecision(6);
  out << "method=" << to_string(method) << " learner=" << to_string(learner) << " N=" << n << " alpha=" << cfg.alpha
      << " seed=" << cfg.master_seed << " frame=" << args.frame_index << '\n';
  out << "channel psi=" << frame.params.psi << " epsilon=" << frame.params.epsilon << " delta=" << frame.params.delta
      << '\n';
  std::size_t hits = 0, size_sum = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const bool covered = sets[i].contains(frame.tests[i].y);
    hits += covered;
    size_sum += sets[i].size();
    out << std::setw(4) << i << "  x=(" << std::setw(9) << xs[i].real() << ',' << std::setw(9) << xs[i].imag()
        << ")  y=" << frame.tests[i].y << "  set=" << std::left << std::setw(9) << format_set(sets[i]) << std::right
        << "  " << (covered ? "covered" : "missed") << '\n';
  }
  out << "coverage " << hits << '/' << sets.size() << "  mean set size "
      << static_cast<double>(size_sum) / static_cast<double>(sets.size()) << '\n';
  return 0;
}

int cmd_selftest(const CliArgs& args, std::ostream& out) {
  SelftestOptions opts;
  opts.seed = args.config.master_seed;
  opts.quantile_rank_offset = args.mutate_quantile_rank;
  return report(run_selftest(opts), out) ? 0 : 1;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    const CliArgs args = parse_args(argc, argv);
    switch (args.command) {
      case Command::run: return cmd_run(args, out);
      case Command::frame: return cmd_frame(args, out);
      case Command::selftest: return cmd_selftest(args, out);
    }
  } catch (const CliExit& e) {
    (e.code == 0 ? out : err) << e.what();
    return e.code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace cpdemod::cli
