#include "spoofshield/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spoofshield {

namespace fs = std::filesystem;
using nlohmann::json;

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "none") return AttackKind::none;
  if (s == "constant_bias") return AttackKind::constant_bias;
  if (s == "stealth") return AttackKind::stealth;
  throw std::invalid_argument("unknown attack kind: " + s);
}

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::none: return "none";
    case AttackKind::constant_bias: return "constant_bias";
    case AttackKind::stealth: return "stealth";
  }
  return "none";
}

// ---------------------------------------------------------------------------
// config blocks

namespace {

Range range_from_json(const json& j, Range fallback) {
  if (j.is_array()) return {j.at(0).get<double>(), j.at(1).get<double>()};
  if (j.is_number()) {
    const double v = j.get<double>();
    return {v, v};
  }
  (void)fallback;
  throw std::invalid_argument("range must be a number or [lo, hi]");
}

json range_to_json(const Range& r) { return json::array({r.lo, r.hi}); }

AttackDirection direction_from_string(const std::string& d) {
  if (d == "lateral") return AttackDirection::lateral;
  if (d == "longitudinal") return AttackDirection::longitudinal;
  if (d == "fixed") return AttackDirection::fixed;
  throw std::invalid_argument("unknown attack direction: " + d);
}

std::string direction_to_string(AttackDirection d) {
  switch (d) {
    case AttackDirection::lateral: return "lateral";
    case AttackDirection::longitudinal: return "longitudinal";
    case AttackDirection::fixed: return "fixed";
  }
  return "lateral";
}

}  // namespace

AttackSpec AttackConfig::resolve(std::uint64_t seed, double duration) const {
  if (kind == AttackKind::none) return AttackSpec{};
  if (!randomize) {
    AttackSpec s = spec;
    s.kind = kind;
    s.validate(duration);
    return s;
  }
  return randomize_attack(seed, duration, kind, ranges);
}

AttackConfig AttackConfig::from_json(const json& j) {
  AttackConfig cfg;
  cfg.kind = attack_kind_from_string(j.value("kind", "constant_bias"));
  cfg.randomize = j.value("randomize", true);
  if (!cfg.randomize) cfg.spec = AttackSpec::from_json(j);
  if (j.contains("ranges")) {
    const json& r = j.at("ranges");
    if (r.contains("start")) cfg.ranges.start = range_from_json(r.at("start"), cfg.ranges.start);
    if (r.contains("duration"))
      cfg.ranges.duration = range_from_json(r.at("duration"), cfg.ranges.duration);
    if (r.contains("magnitude"))
      cfg.ranges.magnitude = range_from_json(r.at("magnitude"), cfg.ranges.magnitude);
    if (r.contains("gamma")) cfg.ranges.gamma = range_from_json(r.at("gamma"), cfg.ranges.gamma);
    if (r.contains("delta")) cfg.ranges.delta = range_from_json(r.at("delta"), cfg.ranges.delta);
    if (r.contains("direction"))
      cfg.ranges.direction = direction_from_string(r.at("direction").get<std::string>());
  }
  return cfg;
}

json AttackConfig::to_json() const {
  json j;
  j["kind"] = to_string(kind);
  j["randomize"] = randomize;
  if (!randomize) {
    json s = spec.to_json();
    for (auto& [k, v] : s.items())
      if (k != "kind") j[k] = v;
  } else {
    j["ranges"] = {{"start", range_to_json(ranges.start)},
                   {"duration", range_to_json(ranges.duration)},
                   {"magnitude", range_to_json(ranges.magnitude)},
                   {"gamma", range_to_json(ranges.gamma)},
                   {"delta", range_to_json(ranges.delta)},
                   {"direction", direction_to_string(ranges.direction)}};
  }
  return j;
}

CalibrationConfig CalibrationConfig::from_json(const json& j) {
  CalibrationConfig cfg;
  if (j.contains("roads")) {
    cfg.roads.clear();
    for (const json& jr : j.at("roads")) {
      std::vector<RoadPiece> road;
      for (const json& jp : jr)
        road.push_back({jp.at("length").get<double>(), jp.value("curvature", 0.0)});
      cfg.roads.push_back(std::move(road));
    }
    if (cfg.roads.size() < 2)
      throw std::invalid_argument("calibration: need at least two road geometries");
  }
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  cfg.duration = j.value("duration", cfg.duration);
  return cfg;
}

json CalibrationConfig::to_json() const {
  json jr = json::array();
  for (const auto& road : roads) {
    json jp = json::array();
    for (const RoadPiece& p : road) jp.push_back({{"length", p.length}, {"curvature", p.curvature}});
    jr.push_back(jp);
  }
  return {{"roads", jr}, {"seeds", seeds}, {"duration", duration}};
}

DetectorConfig DetectorConfig::from_json(const json& j) {
  DetectorConfig cfg;
  cfg.primary = j.value("primary", cfg.primary);
  if (cfg.primary != "lstm" && cfg.primary != "cusum" && cfg.primary != "iforest")
    throw std::invalid_argument("detectors: unknown primary " + cfg.primary);
  if (j.contains("lstm")) {
    const json& l = j.at("lstm");
    cfg.lstm.window = l.value("window", cfg.lstm.window);
    cfg.lstm.hidden = l.value("hidden", cfg.lstm.hidden);
    cfg.lstm.horizon = l.value("horizon", cfg.lstm.horizon);
    cfg.lstm.epochs = l.value("epochs", cfg.lstm.epochs);
    cfg.lstm.batch = l.value("batch", cfg.lstm.batch);
    cfg.lstm.lr = l.value("lr", cfg.lstm.lr);
    cfg.lstm.lr_decay = l.value("lr_decay", cfg.lstm.lr_decay);
    cfg.lstm.clip = l.value("clip", cfg.lstm.clip);
    cfg.lstm.val_fraction = l.value("val_fraction", cfg.lstm.val_fraction);
    cfg.lstm.threshold_sigmas = l.value("threshold_sigmas", cfg.lstm.threshold_sigmas);
    cfg.lstm.hysteresis = l.value("hysteresis", cfg.lstm.hysteresis);
    cfg.lstm.seed = l.value("seed", cfg.lstm.seed);
  }
  if (j.contains("cusum")) {
    const json& c = j.at("cusum");
    cfg.cusum.kappa_sigmas = c.value("kappa_sigmas", cfg.cusum.kappa_sigmas);
    cfg.cusum.h_floor_sigmas = c.value("h_floor_sigmas", cfg.cusum.h_floor_sigmas);
    cfg.cusum.h_margin = c.value("h_margin", cfg.cusum.h_margin);
  }
  if (j.contains("iforest")) {
    const json& f = j.at("iforest");
    cfg.iforest.trees = f.value("trees", cfg.iforest.trees);
    cfg.iforest.subsample = f.value("subsample", cfg.iforest.subsample);
    cfg.iforest.feature_window = f.value("feature_window", cfg.iforest.feature_window);
    cfg.iforest.fa_quantile = f.value("fa_quantile", cfg.iforest.fa_quantile);
    cfg.iforest.threshold_margin = f.value("threshold_margin", cfg.iforest.threshold_margin);
    cfg.iforest.seed = f.value("seed", cfg.iforest.seed);
  }
  return cfg;
}

json DetectorConfig::to_json() const {
  return {{"primary", primary},
          {"lstm",
           {{"window", lstm.window},
            {"hidden", lstm.hidden},
            {"horizon", lstm.horizon},
            {"epochs", lstm.epochs},
            {"batch", lstm.batch},
            {"lr", lstm.lr},
            {"lr_decay", lstm.lr_decay},
            {"clip", lstm.clip},
            {"val_fraction", lstm.val_fraction},
            {"threshold_sigmas", lstm.threshold_sigmas},
            {"hysteresis", lstm.hysteresis},
            {"seed", lstm.seed}}},
          {"cusum",
           {{"kappa_sigmas", cusum.kappa_sigmas},
            {"h_floor_sigmas", cusum.h_floor_sigmas},
            {"h_margin", cusum.h_margin}}},
          {"iforest",
           {{"trees", iforest.trees},
            {"subsample", iforest.subsample},
            {"feature_window", iforest.feature_window},
            {"fa_quantile", iforest.fa_quantile},
            {"threshold_margin", iforest.threshold_margin},
            {"seed", iforest.seed}}}};
}

CampaignConfig CampaignConfig::from_json(const json& j) {
  CampaignConfig cfg;
  cfg.runs = j.value("runs", cfg.runs);
  if (cfg.runs < 1) throw std::invalid_argument("campaign: runs must be >= 1");
  if (j.contains("kinds")) {
    cfg.kinds.clear();
    for (const json& k : j.at("kinds"))
      cfg.kinds.push_back(attack_kind_from_string(k.get<std::string>()));
  }
  cfg.base_seed = j.value("base_seed", cfg.base_seed);
  return cfg;
}

json CampaignConfig::to_json() const {
  json jk = json::array();
  for (AttackKind k : kinds) jk.push_back(to_string(k));
  return {{"runs", runs}, {"kinds", jk}, {"base_seed", base_seed}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;
  if (j.contains("scenario")) cfg.scenario = ScenarioConfig::from_json(j.at("scenario"));
  if (j.contains("attack")) cfg.attack = AttackConfig::from_json(j.at("attack"));
  if (j.contains("fusion")) {
    const json& f = j.at("fusion");
    cfg.fusion.kappa_ut = f.value("kappa_ut", cfg.fusion.kappa_ut);
    cfg.fusion.t_hold = f.value("t_hold", cfg.fusion.t_hold);
    cfg.fusion.readmit_clean = f.value("readmit_clean", cfg.fusion.readmit_clean);
    cfg.fusion.mitigation_enabled = f.value("mitigation", cfg.fusion.mitigation_enabled);
    if (f.contains("residual_source")) {
      const std::string s = f.at("residual_source").get<std::string>();
      if (s == "raw_gps")
        cfg.fusion.residual_source = ResidualSource::raw_gps;
      else if (s == "belief_mean")
        cfg.fusion.residual_source = ResidualSource::belief_mean;
      else
        throw std::invalid_argument("fusion: unknown residual_source " + s);
    }
    if (f.contains("search_radius")) cfg.fusion.match.search_radius = f.at("search_radius");
    if (f.contains("heading_cap_deg"))
      cfg.fusion.match.heading_cap = deg2rad(f.at("heading_cap_deg").get<double>());
  }
  if (j.contains("detectors")) cfg.detectors = DetectorConfig::from_json(j.at("detectors"));
  if (j.contains("calibration"))
    cfg.calibration = CalibrationConfig::from_json(j.at("calibration"));
  if (j.contains("campaign")) cfg.campaign = CampaignConfig::from_json(j.at("campaign"));
  cfg.fusion.noise = cfg.scenario.noise;
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j;
  in >> j;
  return from_json(j);
}

json RunConfig::to_json() const {
  json f = {{"kappa_ut", fusion.kappa_ut},
            {"t_hold", fusion.t_hold},
            {"readmit_clean", fusion.readmit_clean},
            {"mitigation", fusion.mitigation_enabled},
            {"residual_source",
             fusion.residual_source == ResidualSource::raw_gps ? "raw_gps" : "belief_mean"},
            {"search_radius", fusion.match.search_radius},
            {"heading_cap_deg", fusion.match.heading_cap * 180.0 / kPi}};
  return {{"scenario", scenario.to_json()}, {"attack", attack.to_json()},
          {"fusion", f},                    {"detectors", detectors.to_json()},
          {"calibration", calibration.to_json()}, {"campaign", campaign.to_json()}};
}

void RunConfig::apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must look like path.to.key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json* node = &j;
  std::stringstream ss(path);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(ss, key, '.')) {
    if (key.empty()) throw std::invalid_argument("bad override path: " + assignment);
    keys.push_back(key);
  }
  if (keys.empty()) throw std::invalid_argument("bad override path: " + assignment);
  for (size_t i = 0; i + 1 < keys.size(); ++i) node = &(*node)[keys[i]];

  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;  // bare string
  (*node)[keys.back()] = value;
}

// ---------------------------------------------------------------------------
// models

void Models::save(const std::string& dir) const {
  fs::create_directories(dir);
  auto dump = [&](const std::string& name, const json& j) {
    std::ofstream out(fs::path(dir) / name);
    if (!out) throw std::runtime_error("cannot write " + name + " in " + dir);
    out << j.dump(2) << '\n';
  };
  dump("lstm.json", lstm.to_json());
  dump("cusum.json", cusum.to_json());
  dump("iforest.json", iforest.to_json());
}

Models Models::load(const std::string& dir) {
  auto slurp = [&](const std::string& name) {
    std::ifstream in(fs::path(dir) / name);
    if (!in) throw std::runtime_error("cannot open model file: " + (fs::path(dir) / name).string());
    json j;
    in >> j;
    return j;
  };
  Models m;
  m.lstm = LstmModel::from_json(slurp("lstm.json"));
  m.cusum = CusumParams::from_json(slurp("cusum.json"));
  m.iforest = IForestModel::from_json(slurp("iforest.json"));
  return m;
}

std::vector<std::unique_ptr<Detector>> Models::make_detectors(const DetectorConfig& cfg,
                                                              size_t* primary_index) const {
  std::vector<std::unique_ptr<Detector>> out;
  out.push_back(std::make_unique<LstmScorer>(lstm, cfg.lstm.hysteresis));
  out.push_back(std::make_unique<CusumDetector>(cusum));
  out.push_back(std::make_unique<IForestScorer>(iforest));
  if (primary_index) {
    *primary_index = cfg.primary == "cusum" ? 1 : cfg.primary == "iforest" ? 2 : 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// calibration

std::vector<std::vector<double>> calibration_residuals(const RunConfig& cfg) {
  std::vector<std::vector<double>> traces;
  for (size_t r = 0; r < cfg.calibration.roads.size(); ++r) {
    for (std::uint64_t seed : cfg.calibration.seeds) {
      ScenarioConfig sc = cfg.scenario;
      sc.road = cfg.calibration.roads[r];
      sc.duration = cfg.calibration.duration;
      sc.seed = splitmix64(seed + 0x9e37 * r);
      sc.validate();
      const LaneMap map = build_scenario_map(sc);
      const std::vector<SensorFrame> frames = simulate(sc, map);

      // attack-free, so the raw-GPS and belief-mean sources see the same
      // statistics up to filter smoothing; calibrate on the configured one.
      std::vector<double> zs;
      zs.reserve(frames.size());
      if (cfg.fusion.residual_source == ResidualSource::raw_gps) {
        for (const SensorFrame& f : frames) {
          const ResidualSample s = residual(f, f.gps, map, cfg.fusion.match);
          if (s.valid) zs.push_back(s.z);
        }
      } else {
        SuperviseConfig fus = cfg.fusion;
        fus.noise = sc.noise;
        fus.mitigation_enabled = false;
        Supervisor sup(map, fus, {}, 0);
        for (const SensorFrame& f : frames) {
          const TickRecord rec = sup.step(f);
          if (rec.residual_valid) zs.push_back(rec.z);
        }
      }
      traces.push_back(std::move(zs));
    }
  }
  return traces;
}

namespace {

// false-alarm rate of one detector over attack-free residual traces
double replay_false_alarm(Detector& det, const std::vector<std::vector<double>>& traces) {
  long alarms = 0, ticks = 0;
  for (const auto& trace : traces) {
    det.reset();
    for (size_t k = 0; k < trace.size(); ++k) {
      const DetectorVerdict v = det.step({k * 0.1, trace[k], true});
      if (v.decided) {
        ++ticks;
        if (v.alarm) ++alarms;
      }
    }
  }
  det.reset();
  return ticks > 0 ? double(alarms) / double(ticks) : 0.0;
}

}  // namespace

Models calibrate(const RunConfig& cfg, const std::string& out_dir, CalibrationReport* report_out) {
  if (cfg.calibration.roads.size() < 2)
    throw std::invalid_argument("calibration: need at least two road geometries");
  const std::vector<std::vector<double>> traces = calibration_residuals(cfg);

  CalibrationReport rep;
  rep.traces = int(traces.size());
  for (const auto& t : traces) rep.samples += int(t.size());

  Models m;
  m.lstm = lstm_train(traces, cfg.detectors.lstm, &rep.lstm);
  m.cusum = cusum_calibrate(traces, cfg.detectors.cusum);
  m.iforest = iforest_calibrate(traces, cfg.detectors.iforest);
  rep.residual_sigma = m.cusum.kappa / cfg.detectors.cusum.kappa_sigmas;

  {
    LstmScorer ls(m.lstm, cfg.detectors.lstm.hysteresis);
    CusumDetector cs(m.cusum);
    IForestScorer is(m.iforest);
    rep.trace_false_alarm_rate = {replay_false_alarm(ls, traces), replay_false_alarm(cs, traces),
                                  replay_false_alarm(is, traces)};
  }

  fs::create_directories(out_dir);
  m.save(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "calibration_report.json");
    out << rep.to_json().dump(2) << '\n';
  }
  write_manifest(out_dir, cfg.to_json(),
                 {"lstm.json", "cusum.json", "iforest.json", "calibration_report.json"},
                 cfg.calibration.seeds);
  if (report_out) *report_out = rep;
  return m;
}

json CalibrationReport::to_json() const {
  return {{"traces", traces},
          {"samples", samples},
          {"residual_sigma", residual_sigma},
          {"lstm",
           {{"val_mse", lstm.val_mse},
            {"threshold", lstm.threshold},
            {"trailing_avg_nonincreasing", lstm.trailing_avg_nonincreasing},
            {"epoch_loss", lstm.epoch_loss}}},
          {"false_alarm_rate",
           {{"lstm", trace_false_alarm_rate.size() > 0 ? trace_false_alarm_rate[0] : 0.0},
            {"cusum", trace_false_alarm_rate.size() > 1 ? trace_false_alarm_rate[1] : 0.0},
            {"iforest", trace_false_alarm_rate.size() > 2 ? trace_false_alarm_rate[2] : 0.0}}}};
}

// ---------------------------------------------------------------------------
// runs

RunOutput run_one(const RunConfig& cfg, const Models& models, std::uint64_t seed) {
  RunOutput out;
  ScenarioConfig sc = cfg.scenario;
  sc.seed = seed;
  sc.validate();
  const LaneMap map = build_scenario_map(sc);
  out.clean_frames = simulate(sc, map);

  const AttackSpec spec = cfg.attack.resolve(seed, sc.duration);
  AttackResult attacked = apply_attack(out.clean_frames, spec);
  out.attacked_frames = std::move(attacked.frames);
  out.mask = std::move(attacked.mask);

  SuperviseConfig fus = cfg.fusion;
  fus.noise = sc.noise;
  size_t primary = 0;
  auto detectors = models.make_detectors(cfg.detectors, &primary);
  out.records = supervise(out.attacked_frames, map, fus, std::move(detectors), primary);

  // scores
  out.score.seed = seed;
  out.score.attack_kind = to_string(spec.kind);
  const size_t n = out.records.size();
  std::vector<Vec2> est(n), truth(n);
  for (size_t i = 0; i < n; ++i) {
    est[i] = out.records[i].est;
    truth[i] = Vec2(out.records[i].truth->x, out.records[i].truth->y);
  }
  out.score.accuracy = score_rmse(est, truth, 0, n - 1);

  const size_t ndet = out.records.empty() ? 0 : out.records[0].verdicts.size();
  const std::vector<std::string> names = {"lstm", "cusum", "iforest"};
  for (size_t d = 0; d < ndet; ++d) {
    std::vector<bool> alarms(n);
    for (size_t i = 0; i < n; ++i) alarms[i] = out.records[i].verdicts[d].alarm;
    out.score.detector_names.push_back(d < names.size() ? names[d] : "det" + std::to_string(d));
    std::vector<bool> mask(out.mask.begin(), out.mask.begin() + n);
    out.score.detection.push_back(score_detection(alarms, mask, sc.dt()));
  }
  return out;
}

RunScore score_run(const RunConfig& cfg, const Models& models, std::uint64_t seed, bool ablate) {
  RunOutput out = run_one(cfg, models, seed);
  if (ablate) {
    RunConfig off = cfg;
    off.fusion.mitigation_enabled = false;
    const RunOutput base = run_one(off, models, seed);
    out.score.accuracy_no_mitigation = base.score.accuracy;
  }
  return out.score;
}

CampaignSummary run_campaign(const RunConfig& cfg, const Models& models,
                             std::vector<RunScore>* runs_out) {
  std::vector<RunScore> runs;
  for (AttackKind kind : cfg.campaign.kinds) {
    RunConfig rc = cfg;
    rc.attack.kind = kind;
    for (int i = 0; i < cfg.campaign.runs; ++i)
      runs.push_back(score_run(rc, models, cfg.campaign.base_seed + std::uint64_t(i), true));
  }
  const CampaignSummary summary = aggregate(runs);
  if (runs_out) *runs_out = std::move(runs);
  return summary;
}

// ---------------------------------------------------------------------------
// run log

void write_run_log(const std::string& path, const std::vector<TickRecord>& records) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write run log: " + path);
  std::fputs("t,mode,alarm,score,est_x,est_y,truth_x,truth_y,d_cam,d_map,residual\n", f);
  for (const TickRecord& r : records) {
    std::fprintf(f, "%.17g,%s,%d,%.17g,%.17g,%.17g,", r.t,
                 r.mode == FilterMode::mitigation ? "mitigation" : "normal", r.alarm ? 1 : 0,
                 r.score, r.est.x(), r.est.y());
    if (r.truth)
      std::fprintf(f, "%.17g,%.17g,", r.truth->x, r.truth->y);
    else
      std::fputs(",,", f);
    std::fprintf(f, "%.17g,%.17g,", r.d_cam, r.d_map);
    if (r.residual_valid)
      std::fprintf(f, "%.17g\n", r.z);
    else
      std::fputs("\n", f);
  }
  std::fclose(f);
}

std::vector<TickRecord> read_run_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run log: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "t,mode,alarm,score,est_x,est_y,truth_x,truth_y,d_cam,d_map,residual")
    throw std::runtime_error("run log: bad header in " + path);

  std::vector<TickRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 11) cells.emplace_back();
    if (cells.size() != 11)
      throw std::runtime_error("run log: wrong column count on line " + std::to_string(lineno));

    auto num = [&](const std::string& s) {
      double v = 0.0;
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("run log: bad number on line " + std::to_string(lineno));
      return v;
    };
    TickRecord r;
    r.t = num(cells[0]);
    r.mode = cells[1] == "mitigation" ? FilterMode::mitigation : FilterMode::normal;
    r.alarm = num(cells[2]) != 0.0;
    r.score = num(cells[3]);
    r.est = Vec2(num(cells[4]), num(cells[5]));
    if (!cells[6].empty() && !cells[7].empty())
      r.truth = TruthPose{num(cells[6]), num(cells[7]), 0.0};
    r.d_cam = num(cells[8]);
    r.d_map = num(cells[9]);
    if (!cells[10].empty()) {
      r.z = num(cells[10]);
      r.residual_valid = true;
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// manifest

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash missing file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fnv1a(data)));
  return hex;
}

void write_manifest(const std::string& dir, const json& config,
                    const std::vector<std::string>& files,
                    const std::vector<std::uint64_t>& seeds) {
  json j;
  j["version"] = 1;
  {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a(config.dump())));
    j["config_hash"] = hex;
  }
  j["config"] = config;
  j["seeds"] = seeds;
  json jf = json::object();
  for (const std::string& f : files) jf[f] = file_hash((fs::path(dir) / f).string());
  j["files"] = jf;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir);
  out << j.dump(2) << '\n';
}

std::vector<std::string> verify_manifest(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw std::runtime_error("no manifest.json in " + dir);
  json j;
  in >> j;
  std::vector<std::string> bad;
  for (const auto& [name, hash] : j.at("files").items()) {
    const std::string path = (fs::path(dir) / name).string();
    try {
      if (file_hash(path) != hash.get<std::string>()) bad.push_back(name);
    } catch (const std::exception&) {
      bad.push_back(name);
    }
  }
  return bad;
}

}  // namespace spoofshield
