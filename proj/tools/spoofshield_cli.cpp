#include "spoofshield/pipeline.hpp"
#include "spoofshield/plot.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace spoofshield;
using nlohmann::json;

namespace {

constexpr int kExitMissingFile = 2;

std::string default_out() {
  if (const char* env = std::getenv("SPOOFSHIELD_OUT")) return env;
  return "out";
}

json load_config_json(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) {
      std::cerr << "config not found: " << path << '\n';
      std::exit(kExitMissingFile);
    }
    in >> j;
  }
  for (const std::string& o : overrides) RunConfig::apply_override(j, o);
  return j;
}

Models load_models_or_die(const std::string& dir) {
  try {
    return Models::load(dir);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\nrun `spoofshield calibrate` first\n";
    std::exit(kExitMissingFile);
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  std::cout << "wrote " << path.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GPS spoofing detection and mitigation sandbox"};
  app.require_subcommand(1);

  std::string config_path, out_dir = default_out(), models_dir, detector = "lstm",
              mitigation = "on", trace_path;
  std::uint64_t seed = 1;
  bool have_seed = false;
  std::vector<std::string> overrides;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run config JSON");
    sub->add_option("--out", out_dir, "output directory (env SPOOFSHIELD_OUT overrides default)");
    sub->add_option("--set", overrides, "config override, path.to.key=value")->take_all();
  };

  CLI::App* cal = app.add_subcommand("calibrate", "train and calibrate the detectors");
  add_common(cal);

  CLI::App* run = app.add_subcommand("run", "one attack episode end to end");
  add_common(run);
  run->add_option("--seed", seed, "scenario + attack seed")->each([&](const std::string&) {
    have_seed = true;
  });
  run->add_option("--models", models_dir, "directory with calibrated models (default: --out)");
  run->add_option("--detector", detector, "primary detector: lstm|cusum|iforest")
      ->check(CLI::IsMember({"lstm", "cusum", "iforest"}));
  run->add_option("--mitigation", mitigation, "on|off")->check(CLI::IsMember({"on", "off"}));

  CLI::App* ev = app.add_subcommand("eval", "score a recorded run log against its mask");
  add_common(ev);
  ev->add_option("--log", trace_path, "run log CSV from `run`")->required();

  CLI::App* plot = app.add_subcommand("plot", "render SVG plots from a run log");
  add_common(plot);
  plot->add_option("--log", trace_path, "run log CSV from `run`")->required();

  CLI::App* camp = app.add_subcommand("campaign", "batch of randomized episodes, aggregated");
  add_common(camp);
  camp->add_option("--seed", seed, "campaign base seed")->each([&](const std::string&) {
    have_seed = true;
  });
  camp->add_option("--models", models_dir, "directory with calibrated models (default: --out)");
  camp->add_option("--detector", detector, "primary detector: lstm|cusum|iforest|all")
      ->check(CLI::IsMember({"lstm", "cusum", "iforest", "all"}));
  camp->add_option("--mitigation", mitigation, "on|off")->check(CLI::IsMember({"on", "off"}));

  CLI11_PARSE(app, argc, argv);

  try {
    json cfg_json = load_config_json(config_path, overrides);
    if (models_dir.empty()) models_dir = out_dir;

    if (cal->parsed()) {
      RunConfig cfg = RunConfig::from_json(cfg_json);
      CalibrationReport rep;
      calibrate(cfg, out_dir, &rep);
      std::cout << "calibrated on " << rep.traces << " traces (" << rep.samples
                << " samples), residual sigma " << rep.residual_sigma << "\n"
                << "models + calibration_report.json + manifest.json in " << out_dir << '\n';
      return 0;
    }

    if (run->parsed()) {
      if (detector != "all") cfg_json["detectors"]["primary"] = detector;
      cfg_json["fusion"]["mitigation"] = (mitigation == "on");
      RunConfig cfg = RunConfig::from_json(cfg_json);
      const Models models = load_models_or_die(models_dir);
      const std::uint64_t s = have_seed ? seed : cfg.scenario.seed;

      const RunOutput out = run_one(cfg, models, s);
      fs::create_directories(out_dir);
      write_run_log((fs::path(out_dir) / "run_log.csv").string(), out.records);
      std::cout << "wrote " << (fs::path(out_dir) / "run_log.csv").string() << '\n';

      json score = json::object();
      score["seed"] = s;
      score["attack_kind"] = out.score.attack_kind;
      score["accuracy"] = out.score.accuracy.to_json();
      for (size_t d = 0; d < out.score.detector_names.size(); ++d)
        score["detection"][out.score.detector_names[d]] = out.score.detection[d].to_json();
      write_json(fs::path(out_dir) / "run_score.json", score);

      write_trajectory_svg((fs::path(out_dir) / "trajectory.svg").string(), out.records,
                           out.attacked_frames);
      size_t primary = 0;
      models.make_detectors(cfg.detectors, &primary);
      const double thr = out.records.empty() || out.records[0].verdicts.size() <= primary
                             ? 0.0
                             : out.records.back().verdicts[primary].threshold;
      write_residual_svg((fs::path(out_dir) / "residual.svg").string(), out.records, thr);
      std::cout << "plots in " << out_dir << '\n';
      return 0;
    }

    if (ev->parsed()) {
      if (!fs::exists(trace_path)) {
        std::cerr << "log not found: " << trace_path << '\n';
        return kExitMissingFile;
      }
      const std::vector<TickRecord> records = read_run_log(trace_path);
      std::vector<Vec2> est, truth;
      std::vector<bool> alarms;
      for (const TickRecord& r : records) {
        alarms.push_back(r.alarm);
        if (r.truth) {
          est.push_back(r.est);
          truth.emplace_back(r.truth->x, r.truth->y);
        }
      }
      json j;
      if (!est.empty()) j["accuracy"] = score_rmse(est, truth, 0, est.size() - 1).to_json();
      long mit = 0;
      for (const TickRecord& r : records)
        if (r.mode == FilterMode::mitigation) ++mit;
      j["ticks"] = records.size();
      j["mitigation_ticks"] = mit;
      j["alarm_ticks"] = long(std::count(alarms.begin(), alarms.end(), true));
      fs::create_directories(out_dir);
      write_json(fs::path(out_dir) / "eval.json", j);
      std::cout << j.dump(2) << '\n';
      return 0;
    }

    if (plot->parsed()) {
      if (!fs::exists(trace_path)) {
        std::cerr << "log not found: " << trace_path << '\n';
        return kExitMissingFile;
      }
      const std::vector<TickRecord> records = read_run_log(trace_path);
      fs::create_directories(out_dir);
      write_trajectory_svg((fs::path(out_dir) / "trajectory.svg").string(), records, {});
      write_residual_svg((fs::path(out_dir) / "residual.svg").string(), records, 0.0);
      std::cout << "plots in " << out_dir << '\n';
      return 0;
    }

    if (camp->parsed()) {
      if (detector != "all") cfg_json["detectors"]["primary"] = detector;
      cfg_json["fusion"]["mitigation"] = (mitigation == "on");
      RunConfig cfg = RunConfig::from_json(cfg_json);
      if (have_seed) cfg.campaign.base_seed = seed;
      const Models models = load_models_or_die(models_dir);

      std::vector<RunScore> runs;
      const CampaignSummary summary = run_campaign(cfg, models, &runs);
      fs::create_directories(out_dir);
      write_json(fs::path(out_dir) / "campaign.json", summary.to_json());
      std::cout << summary.to_table();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
