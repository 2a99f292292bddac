#include "riskbo/experiment.hpp"

#include <nlohmann/json.hpp>

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace riskbo {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kValidAlgorithms = {
    "vucb-unif", "vucb-prob", "stableopt", "random", "env-sampled"};

void check_algorithms(const std::vector<std::string>& algos) {
  if (algos.empty()) {
    throw std::invalid_argument("spec: algorithm list must be nonempty");
  }
  for (const auto& a : algos) {
    algo_from_name(a);  // throws with the valid list
  }
}

ZMode zmode_from(const std::string& s) {
  if (s == "discrete") return ZMode::Discrete;
  if (s == "continuous") return ZMode::Continuous;
  throw std::invalid_argument("spec: z_mode must be discrete or continuous");
}

int default_n_init(const std::string& problem) {
  return problem.rfind("hartmann", 0) == 0 ? 10 : 3;
}

void parse_into(ExperimentSpec& spec, const json& j, const std::string& ctx) {
  for (const auto& [key, val] : j.items()) {
    const std::string path = ctx.empty() ? key : ctx + "." + key;
    if (ctx.empty()) {
      if (key == "problem") spec.problem = val.get<std::string>();
      else if (key == "z_mode") spec.z_mode = zmode_from(val.get<std::string>());
      else if (key == "alpha") spec.alpha = val.get<double>();
      else if (key == "T" || key == "iterations") spec.iterations = val.get<int>();
      else if (key == "repeats") spec.repeats = val.get<int>();
      else if (key == "master_seed") spec.master_seed = val.get<std::uint64_t>();
      else if (key == "algorithms") spec.algorithms = val.get<std::vector<std::string>>();
      else if (key == "out_dir") spec.out_dir = val.get<std::string>();
      else if (key == "workers") spec.workers = val.get<int>();
      else if (key == "beta") spec.beta_kind = val.get<std::string>();
      else if (key == "beta_B") spec.beta_B = val.get<double>();
      else if (key == "beta_delta") spec.beta_delta = val.get<double>();
      else if (key == "n_init") spec.n_init = val.get<int>();
      else if (key == "refit_every") spec.refit_every = val.get<int>();
      else if (key == "recommend") spec.recommend = val.get<std::string>();
      else if (key == "env_sample_count") spec.env_sample_count = val.get<int>();
      else if (key == "metric_z_samples") spec.metric_z_samples = val.get<int>();
      else if (key == "pinball") parse_into(spec, val, "pinball");
      else if (key == "lnso") parse_into(spec, val, "lnso");
      else if (key == "optimizer") parse_into(spec, val, "optimizer");
      else if (key == "lv_search") parse_into(spec, val, "lv_search");
      else throw std::invalid_argument("spec: unknown key '" + path + "'");
    } else if (ctx == "pinball") {
      if (key == "iters") spec.pinball.iters = val.get<int>();
      else if (key == "batch") spec.pinball.batch = val.get<int>();
      else if (key == "step_scale") spec.pinball.step_scale = val.get<double>();
      else if (key == "pilot") spec.pinball.pilot = val.get<int>();
      else throw std::invalid_argument("spec: unknown key '" + path + "'");
    } else if (ctx == "lnso") {
      if (key == "radius") spec.lnso.radius = val.get<double>();
      else if (key == "x_steps") spec.lnso.x_steps = val.get<int>();
      else if (key == "train_steps") spec.lnso.train_steps = val.get<int>();
      else if (key == "step_x") spec.lnso.step_x = val.get<double>();
      else if (key == "step_theta") spec.lnso.step_theta = val.get<double>();
      else if (key == "n_z") spec.lnso.n_z = val.get<int>();
      else if (key == "n_x") spec.lnso.n_x = val.get<int>();
      else if (key == "trigger_dist") spec.lnso.trigger_dist = val.get<double>();
      else if (key == "hidden") spec.lnso.hidden = val.get<int>();
      else throw std::invalid_argument("spec: unknown key '" + path + "'");
    } else if (ctx == "optimizer") {
      if (key == "multistart") spec.knobs.multistart = val.get<int>();
      else if (key == "ascent_steps") spec.knobs.ascent_steps = val.get<int>();
      else if (key == "step") spec.knobs.step = val.get<double>();
      else if (key == "sweep_points") spec.knobs.sweep_points = val.get<int>();
      else throw std::invalid_argument("spec: unknown key '" + path + "'");
    } else if (ctx == "lv_search") {
      if (key == "starts") spec.lv_search.starts = val.get<int>();
      else if (key == "hinge_steps") spec.lv_search.hinge_steps = val.get<int>();
      else if (key == "density_steps") spec.lv_search.density_steps = val.get<int>();
      else if (key == "step") spec.lv_search.step = val.get<double>();
      else if (key == "tol") spec.lv_search.tol = val.get<double>();
      else throw std::invalid_argument("spec: unknown key '" + path + "'");
    }
  }
}

void validate(const ExperimentSpec& spec) {
  if (spec.repeats < 1) throw std::invalid_argument("spec: repeats >= 1");
  if (spec.iterations < 1) throw std::invalid_argument("spec: T >= 1");
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) {
    throw std::invalid_argument("spec: alpha in (0,1)");
  }
  if (spec.beta_kind != "practical" && spec.beta_kind != "theoretical") {
    throw std::invalid_argument("spec: beta must be practical or theoretical");
  }
  if (spec.recommend != "mean-var" && spec.recommend != "lcb-max") {
    throw std::invalid_argument("spec: recommend must be mean-var or lcb-max");
  }
  check_algorithms(spec.algorithms);
  make_problem(spec.problem, spec.z_mode, spec.alpha);  // validates the name
}

}  // namespace

ExperimentSpec parse_spec_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("spec: invalid JSON: ") + e.what());
  }
  ExperimentSpec spec;
  parse_into(spec, j, "");
  validate(spec);
  return spec;
}

ExperimentSpec parse_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("spec: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_spec_text(ss.str());
}

std::string spec_to_json(const ExperimentSpec& s) {
  json j;
  j["problem"] = s.problem;
  j["z_mode"] = s.z_mode == ZMode::Discrete ? "discrete" : "continuous";
  j["alpha"] = s.alpha;
  j["T"] = s.iterations;
  j["repeats"] = s.repeats;
  j["master_seed"] = s.master_seed;
  j["algorithms"] = s.algorithms;
  j["out_dir"] = s.out_dir;
  j["workers"] = s.workers;
  j["beta"] = s.beta_kind;
  j["beta_B"] = s.beta_B;
  j["beta_delta"] = s.beta_delta;
  j["n_init"] = s.n_init;
  j["refit_every"] = s.refit_every;
  j["recommend"] = s.recommend;
  j["env_sample_count"] = s.env_sample_count;
  j["metric_z_samples"] = s.metric_z_samples;
  j["pinball"] = {{"iters", s.pinball.iters},
                  {"batch", s.pinball.batch},
                  {"step_scale", s.pinball.step_scale},
                  {"pilot", s.pinball.pilot}};
  j["lnso"] = {{"radius", s.lnso.radius},       {"x_steps", s.lnso.x_steps},
               {"train_steps", s.lnso.train_steps}, {"step_x", s.lnso.step_x},
               {"step_theta", s.lnso.step_theta},   {"n_z", s.lnso.n_z},
               {"n_x", s.lnso.n_x},             {"trigger_dist", s.lnso.trigger_dist},
               {"hidden", s.lnso.hidden}};
  j["optimizer"] = {{"multistart", s.knobs.multistart},
                    {"ascent_steps", s.knobs.ascent_steps},
                    {"step", s.knobs.step},
                    {"sweep_points", s.knobs.sweep_points}};
  j["lv_search"] = {{"starts", s.lv_search.starts},
                    {"hinge_steps", s.lv_search.hinge_steps},
                    {"density_steps", s.lv_search.density_steps},
                    {"step", s.lv_search.step},
                    {"tol", s.lv_search.tol}};
  return j.dump(2);
}

void apply_overrides(ExperimentSpec& spec,
                     const std::map<std::string, std::string>& overrides) {
  json j = json::object();
  std::string acq, lv_mode;
  for (const auto& [key, raw] : overrides) {
    if (key == "acq") {
      acq = raw;
      continue;
    }
    if (key == "lv_mode") {
      lv_mode = raw;
      continue;
    }
    json v;
    if (key == "problem" || key == "z_mode" || key == "out_dir" ||
        key == "beta" || key == "recommend") {
      v = raw;
    } else if (key == "algorithms") {
      v = json::array();
      std::stringstream ss(raw);
      std::string item;
      while (std::getline(ss, item, ',')) v.push_back(item);
    } else {
      v = json::parse(raw, nullptr, false);
      if (v.is_discarded()) v = raw;
    }
    // nested paths use dots: pinball.iters
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      j[key] = v;
    } else {
      j[key.substr(0, dot)][key.substr(dot + 1)] = v;
    }
  }
  if (!acq.empty() || !lv_mode.empty()) {
    if (acq.empty() || acq == "vucb") {
      j["algorithms"] = {lv_mode == "uniform" ? "vucb-unif" : "vucb-prob"};
    } else {
      j["algorithms"] = {acq};
    }
  }
  parse_into(spec, j, "");
  validate(spec);
}

RunConfig make_run_config(const ExperimentSpec& spec, const std::string& algo) {
  RunConfig cfg;
  cfg.problem = make_problem(spec.problem, spec.z_mode, spec.alpha);
  cfg.problem.metric_z_samples = spec.metric_z_samples;
  cfg.algo = algo_from_name(algo);
  cfg.iterations = spec.iterations;
  cfg.n_init = spec.n_init > 0 ? spec.n_init : default_n_init(spec.problem);
  if (spec.beta_kind == "practical") {
    cfg.beta.kind = BetaSchedule::Kind::Practical;
  } else {
    cfg.beta.kind = BetaSchedule::Kind::Theoretical;
    cfg.beta.rkhs_bound = spec.beta_B;
    cfg.beta.delta = spec.beta_delta;
    cfg.beta.sigma_n = std::sqrt(cfg.problem.noise_var);
  }
  cfg.refit_every = spec.refit_every;
  cfg.recommend = spec.recommend == "lcb-max" ? RecommendMode::LcbMax
                                              : RecommendMode::MeanVar;
  cfg.knobs = spec.knobs;
  cfg.pinball = spec.pinball;
  cfg.lnso = spec.lnso;
  cfg.lv_search = spec.lv_search;
  cfg.env_sample_count = spec.env_sample_count;
  return cfg;
}

namespace {

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const json& a) {
  Vec v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
  return v;
}

json hyper_to_json(const GPHyper& h) {
  return {{"lengthscales", vec_to_json(h.lengthscales)},
          {"signal_var", h.signal_var},
          {"noise_var", h.noise_var}};
}

GPHyper hyper_from_json(const json& j) {
  return GPHyper(vec_from_json(j.at("lengthscales")),
                 j.at("signal_var").get<double>(),
                 j.at("noise_var").get<double>());
}

}  // namespace

std::string trace_to_jsonl(const RunOutcome& run, const ExperimentSpec& spec) {
  std::ostringstream out;
  json header;
  header["type"] = "header";
  header["algorithm"] = run.algorithm;
  header["seed"] = run.seed;
  header["repeat"] = run.repeat;
  header["problem"] = spec.problem;
  header["z_mode"] = spec.z_mode == ZMode::Discrete ? "discrete" : "continuous";
  header["alpha"] = spec.alpha;
  header["T"] = spec.iterations;
  header["code_version"] = kCodeVersion;
  header["metric_z_samples"] = spec.metric_z_samples;
  header["percentile_method"] = "linear-interpolation";
  header["hyper0"] = hyper_to_json(run.trace.hyper0);
  json init = json::array();
  for (int i = 0; i < run.trace.init_y.size(); ++i) {
    init.push_back({{"x", vec_to_json(run.trace.init_x.row(i).transpose())},
                    {"z", vec_to_json(run.trace.init_z.row(i).transpose())},
                    {"y", run.trace.init_y[i]}});
  }
  header["init"] = init;
  if (!run.error.empty()) header["error"] = run.error;
  out << header.dump() << "\n";
  for (const IterRecord& it : run.trace.iters) {
    json row;
    row["type"] = "iter";
    row["t"] = it.t;
    row["x"] = vec_to_json(it.x);
    row["z"] = vec_to_json(it.z);
    row["y"] = it.y;
    row["beta"] = it.beta;
    row["sigma"] = it.sigma_before;
    row["var_lo"] = it.var_lo;
    row["var_hi"] = it.var_hi;
    row["lv_certified"] = it.lv_certified;
    if (it.x_rec.size() > 0) row["x_rec"] = vec_to_json(it.x_rec);
    if (std::isfinite(it.metric)) row["metric"] = it.metric;
    if (it.refit) row["hyper"] = hyper_to_json(it.hyper);
    if (std::isfinite(it.lv_hit)) row["lv_hit"] = it.lv_hit;
    out << row.dump() << "\n";
  }
  return out.str();
}

RunOutcome trace_from_jsonl(const std::string& text) {
  RunOutcome run;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  GPHyper hyper;
  std::vector<IterRecord> iters;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "header") {
      have_header = true;
      run.algorithm = j.at("algorithm").get<std::string>();
      run.seed = j.at("seed").get<std::uint64_t>();
      run.repeat = j.value("repeat", 0);
      if (j.contains("error")) run.error = j["error"].get<std::string>();
      run.trace.hyper0 = hyper_from_json(j.at("hyper0"));
      hyper = run.trace.hyper0;
      const json& init = j.at("init");
      const int n = static_cast<int>(init.size());
      if (n > 0) {
        const int dx = static_cast<int>(init[0]["x"].size());
        const int dz = static_cast<int>(init[0]["z"].size());
        run.trace.init_x.resize(n, dx);
        run.trace.init_z.resize(n, dz);
        run.trace.init_y.resize(n);
        for (int i = 0; i < n; ++i) {
          run.trace.init_x.row(i) = vec_from_json(init[i]["x"]).transpose();
          run.trace.init_z.row(i) = vec_from_json(init[i]["z"]).transpose();
          run.trace.init_y[i] = init[i]["y"].get<double>();
        }
      }
    } else if (type == "iter") {
      IterRecord it;
      it.t = j.at("t").get<int>();
      it.x = vec_from_json(j.at("x"));
      it.z = vec_from_json(j.at("z"));
      it.y = j.at("y").get<double>();
      it.beta = j.at("beta").get<double>();
      it.sigma_before = j.at("sigma").get<double>();
      it.var_lo = j.at("var_lo").get<double>();
      it.var_hi = j.at("var_hi").get<double>();
      it.lv_certified = j.at("lv_certified").get<bool>();
      if (j.contains("x_rec")) it.x_rec = vec_from_json(j["x_rec"]);
      if (j.contains("metric")) it.metric = j["metric"].get<double>();
      if (j.contains("hyper")) {
        it.refit = true;
        hyper = hyper_from_json(j["hyper"]);
      }
      it.hyper = hyper;
      if (j.contains("lv_hit")) it.lv_hit = j["lv_hit"].get<double>();
      iters.push_back(std::move(it));
    }
  }
  if (!have_header) throw std::runtime_error("trace_from_jsonl: no header");
  run.trace.iters = std::move(iters);
  return run;
}

std::vector<SummaryRow> summarize_traces(
    const std::vector<RunOutcome>& runs,
    const std::vector<std::string>& algorithm_order, double metric_eps) {
  std::vector<SummaryRow> rows;
  int iterations = 0;
  for (const auto& r : runs) {
    iterations = std::max(iterations, static_cast<int>(r.trace.iters.size()));
  }
  for (const auto& alg : algorithm_order) {
    for (int t = 1; t <= iterations; ++t) {
      std::vector<double> logs;
      for (const auto& r : runs) {
        if (r.algorithm != alg || !r.error.empty()) continue;
        if (t > static_cast<int>(r.trace.iters.size())) continue;
        const double m = r.trace.iters[t - 1].metric;
        if (!std::isfinite(m)) continue;
        logs.push_back(std::log10(std::max(m, 0.0) + metric_eps + 1e-12));
      }
      if (logs.empty()) continue;
      rows.push_back({t, alg, percentile(logs, 0.5), percentile(logs, 0.15),
                      percentile(logs, 0.85)});
    }
  }
  return rows;
}

namespace {

void write_summary_csv(const std::string& path,
                       const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "iteration,algorithm,median_log10_metric,p15,p85\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.12g,%.12g,%.12g\n", r.iteration,
                  r.algorithm.c_str(), r.median_log10_metric, r.p15, r.p85);
    out << buf;
  }
}

std::vector<RunOutcome> read_traces(const std::string& dir,
                                    std::vector<std::string>* algo_order) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("trace_", 0) == 0 && e.path().extension() == ".jsonl") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<RunOutcome> runs;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::stringstream ss;
    ss << in.rdbuf();
    runs.push_back(trace_from_jsonl(ss.str()));
    if (algo_order && std::find(algo_order->begin(), algo_order->end(),
                                runs.back().algorithm) == algo_order->end()) {
      algo_order->push_back(runs.back().algorithm);
    }
  }
  return runs;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.out_dir.empty()) {
    throw std::invalid_argument("run_experiment: out_dir not set");
  }
  fs::create_directories(spec.out_dir);
  fs::create_directories(fs::path(spec.out_dir) / "fixtures");

  const Problem problem =
      make_problem(spec.problem, spec.z_mode, spec.alpha);
  const OracleBest oracle = oracle_best(problem, spec.alpha);  // warm cache

  // fixtures
  std::vector<std::string> fixture_files;
  {
    const std::string oracle_path =
        (fs::path(spec.out_dir) / "fixtures" /
         ("oracle_" + spec.problem + ".txt"))
            .string();
    write_oracle_file(oracle_path, problem, oracle);
    fixture_files.push_back(oracle_path);
    if (spec.z_mode == ZMode::Discrete) {
      const std::string atoms_path =
          (fs::path(spec.out_dir) / "fixtures" /
           ("atoms_" + spec.problem + ".txt"))
              .string();
      write_atoms_file(atoms_path, problem.env);
      fixture_files.push_back(atoms_path);
    }
  }

  struct Job {
    std::string algorithm;
    int repeat;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& alg : spec.algorithms) {
    for (int r = 0; r < spec.repeats; ++r) {
      jobs.push_back({alg, r, split_seed(spec.master_seed, alg, r)});
    }
  }

  ExperimentResult result;
  result.runs.resize(jobs.size());
  if (spec.workers > 0) omp_set_num_threads(spec.workers);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < static_cast<int>(jobs.size()); ++i) {
    RunOutcome& out = result.runs[i];
    out.algorithm = jobs[i].algorithm;
    out.repeat = jobs[i].repeat;
    out.seed = jobs[i].seed;
    try {
      const RunConfig cfg = make_run_config(spec, jobs[i].algorithm);
      Rng rng(jobs[i].seed);
      out.trace = run_vucb(cfg, rng);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  }

  std::vector<std::string> trace_files;
  for (const auto& run : result.runs) {
    if (!run.error.empty()) ++result.failures;
    const std::string path =
        (fs::path(spec.out_dir) /
         ("trace_" + run.algorithm + "_" + std::to_string(run.seed) + ".jsonl"))
            .string();
    std::ofstream out(path);
    out << trace_to_jsonl(run, spec);
    trace_files.push_back(path);
  }

  std::vector<std::string> algo_order = spec.algorithms;
  std::sort(algo_order.begin(), algo_order.end());
  const auto rows =
      summarize_traces(result.runs, algo_order, problem.metric_eps);
  const std::string summary_path =
      (fs::path(spec.out_dir) / "summary.csv").string();
  write_summary_csv(summary_path, rows);

  // manifest with content hashes of every declared output
  json manifest;
  manifest["spec"] = json::parse(spec_to_json(spec));
  {
    const std::string canon = spec_to_json(spec);
    manifest["spec_hash"] = hex64(fnv1a(canon.data(), canon.size()));
  }
  manifest["code_version"] = kCodeVersion;
  manifest["metric_z_samples"] = spec.metric_z_samples;
  manifest["percentile_method"] = "linear-interpolation";
  manifest["failures"] = result.failures;
  json files = json::object();
  for (const auto& f : trace_files) {
    files[fs::path(f).filename().string()] = hex64(fnv1a_file(f));
  }
  for (const auto& f : fixture_files) {
    files[std::string("fixtures/") + fs::path(f).filename().string()] =
        hex64(fnv1a_file(f));
  }
  files["summary.csv"] = hex64(fnv1a_file(summary_path));
  manifest["files"] = files;
  std::ofstream mout(fs::path(spec.out_dir) / "manifest.json");
  mout << manifest.dump(2) << "\n";

  return result;
}

void summarize_dir(const std::string& dir) {
  std::vector<std::string> algo_order;
  const auto runs = read_traces(dir, &algo_order);
  std::sort(algo_order.begin(), algo_order.end());
  if (runs.empty()) throw std::runtime_error("summarize: no trace files in " + dir);
  // metric_eps is not recoverable from traces alone; infer from problem
  double eps = 0.0;
  {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (in) {
      json m = json::parse(in, nullptr, false);
      if (!m.is_discarded() && m.contains("spec") &&
          m["spec"].value("z_mode", "discrete") == "continuous") {
        eps = 0.01;
      }
    }
  }
  write_summary_csv((fs::path(dir) / "summary.csv").string(),
                    summarize_traces(runs, algo_order, eps));
}

void emit_plotdata(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "summary.csv");
  if (!in) throw std::runtime_error("plotdata: missing summary.csv in " + dir);
  std::ofstream out(fs::path(dir) / "plotdata.csv");
  out << "iteration,algorithm,median,lo,hi\n";
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string iter, alg, med, p15, p85;
    std::getline(ss, iter, ',');
    std::getline(ss, alg, ',');
    std::getline(ss, med, ',');
    std::getline(ss, p15, ',');
    std::getline(ss, p85, ',');
    if (iter.empty() || alg.empty()) {
      throw std::runtime_error("plotdata: malformed summary row: " + line);
    }
    const double m = std::stod(med), lo = std::stod(p15), hi = std::stod(p85);
    if (!(lo <= m && m <= hi)) {
      throw std::runtime_error("plotdata: band violates lo <= median <= hi");
    }
    out << iter << "," << alg << "," << med << "," << p15 << "," << p85
        << "\n";
  }
}

}  // namespace riskbo
