#include "pnrtomo/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pnrtomo/errors.hpp"

namespace pnrtomo {

using nlohmann::json;

namespace {

// Config reading ------------------------------------------------------------

std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

// One JSON object; remembers which keys were read so leftovers can be rejected.
class Section {
 public:
  Section(const json* j, std::string path, std::string context = {})
      : j_(j), path_(std::move(path)), context_(std::move(context)) {
    if (j_ && !j_->is_object()) fail(path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_ && j_->contains(key) && !(*j_)[key].is_null();
  }
  const json& raw(const std::string& key) { return (*j_)[key]; }

  double number(const std::string& key, double def) {
    if (!has(key)) return def;
    const auto& v = raw(key);
    if (!v.is_number()) fail(child(path_, key), "expected a number");
    return v.get<double>();
  }
  double required_number(const std::string& key) {
    if (!has(key)) fail(child(path_, key), "required field missing");
    return number(key, 0.0);
  }
  std::int64_t integer(const std::string& key, std::int64_t def) {
    if (!has(key)) return def;
    const auto& v = raw(key);
    if (!v.is_number_integer()) fail(child(path_, key), "expected an integer");
    return v.get<std::int64_t>();
  }
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
    if (!has(key)) return def;
    const auto& v = raw(key);
    if (!v.is_number_unsigned()) fail(child(path_, key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    const auto& v = raw(key);
    if (!v.is_boolean()) fail(child(path_, key), "expected true or false");
    return v.get<bool>();
  }
  std::string choice(const std::string& key, const std::string& def, std::initializer_list<const char*> allowed) {
    if (!has(key)) return def;
    const auto& v = raw(key);
    std::string s;
    if (v.is_string()) s = v.get<std::string>();
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return s == a; });
    if (!ok) {
      std::string msg = "expected one of";
      for (const char* a : allowed) msg += std::string(" \"") + a + "\"";
      fail(child(path_, key), msg);
    }
    return s;
  }

  void finish() const {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!seen_.count(it.key())) fail(child(path_, it.key()), "unknown field");
  }

  [[noreturn]] void fail(const std::string& where, const std::string& msg) const {
    throw SchemaError("config " + (where.empty() ? std::string("/") : where) + ": " + msg + context_);
  }

  const std::string& path() const { return path_; }

 private:
  const json* j_;
  std::string path_;
  std::string context_;
  std::set<std::string> seen_;
};

const json* sub(const json& root, const std::string& key) {
  return root.contains(key) && !root[key].is_null() ? &root[key] : nullptr;
}

const char* method_name(BinningMethod m) { return m == BinningMethod::Area ? "area" : "threshold"; }
const char* solver_name(SolverKind s) { return s == SolverKind::Plain ? "plain" : "accelerated"; }
const char* tail_name(TailPolicy t) { return t == TailPolicy::Renormalize ? "renormalize" : "lump"; }

ReconstructionConfig read_reconstruction(Section& s) {
  ReconstructionConfig r;
  r.truncation = static_cast<int>(s.integer("truncation", r.truncation));
  r.outcomes = static_cast<int>(s.integer("outcomes", r.outcomes));
  r.reg_weight = s.number("reg_weight", r.reg_weight);
  r.max_iters = static_cast<int>(s.integer("max_iters", r.max_iters));
  r.tol = s.number("tol", r.tol);
  r.solver = s.choice("solver", "accelerated", {"accelerated", "plain"}) == "plain" ? SolverKind::Plain
                                                                                       : SolverKind::Accelerated;
  if (s.has("init_eta")) r.init_eta = s.number("init_eta", 0.0);
  r.tail_policy = s.choice("tail_policy", "lump", {"lump", "renormalize"}) == "renormalize"
                      ? TailPolicy::Renormalize
                      : TailPolicy::LumpIntoLast;
  return r;
}

json reconstruction_json(const ReconstructionConfig& r) {
  return {{"truncation", r.truncation},
          {"outcomes", r.outcomes},
          {"reg_weight", r.reg_weight},
          {"max_iters", r.max_iters},
          {"tol", r.tol},
          {"solver", solver_name(r.solver)},
          {"init_eta", r.init_eta ? json(*r.init_eta) : json(nullptr)},
          {"tail_policy", tail_name(r.tail_policy)}};
}

ProbeEnsemble read_ensemble_section(const json* j) {
  Section s(j, "/ensemble");
  constexpr std::uint64_t kDefaultPulses = 100000;
  const std::uint64_t n_pulses = s.unsigned_integer("n_pulses", kDefaultPulses);
  const bool has_probes = s.has("probes");
  const std::string preset = s.choice("preset", has_probes ? "" : "paper", {"paper", ""});
  if (has_probes && preset == "paper") s.fail("/ensemble", "give either \"preset\" or \"probes\", not both");
  s.finish();
  if (!has_probes) {
    if (n_pulses == 0) throw ConfigError("/ensemble/n_pulses must be >= 1");
    return ProbeEnsemble::paper_default(n_pulses);
  }
  const json& arr = s.raw("probes");
  if (!arr.is_array()) s.fail("/ensemble/probes", "expected an array");
  std::vector<Probe> probes;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = child("/ensemble/probes", i);
    std::string context;
    if (arr[i].is_object() && arr[i].contains("id") && arr[i]["id"].is_number_integer())
      context = " (probe id " + std::to_string(arr[i]["id"].get<std::int64_t>()) + ")";
    Section p(&arr[i], path, context);
    Probe pr;
    if (!p.has("id")) p.fail(child(path, "id"), "required field missing");
    pr.id = p.integer("id", 0);
    pr.mean_photons = p.required_number("mean_photons");
    if (p.has("attenuation_db")) pr.attenuation_db = p.number("attenuation_db", 0.0);
    pr.n_pulses = p.unsigned_integer("n_pulses", n_pulses);
    p.finish();
    probes.push_back(pr);
  }
  try {
    return ProbeEnsemble(std::move(probes));
  } catch (const DomainError& e) {
    throw ConfigError(std::string("/ensemble: ") + e.what());
  }
}

json ensemble_json(const ProbeEnsemble& e) {
  json arr = json::array();
  for (const auto& p : e.probes()) {
    json o = {{"id", p.id}, {"mean_photons", p.mean_photons}, {"n_pulses", p.n_pulses}};
    if (p.attenuation_db) o["attenuation_db"] = *p.attenuation_db;
    arr.push_back(o);
  }
  return arr;
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_artifact(const fs::path& file) {
  const std::string text = read_file(file);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(file.string() + ": " + e.what());
  }
}

template <class T>
T field(const json& j, const std::string& key, const fs::path& file) {
  if (!j.contains(key)) throw SchemaError(file.string() + ": missing field \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(file.string() + ": field \"" + key + "\" has the wrong type");
  }
}

std::optional<double> opt_field(const json& j, const std::string& key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

json lineage_json(const Lineage& l) { return {{"config_hash", l.config_hash}, {"seed", l.seed}}; }

Lineage read_lineage(const json& j, const fs::path& file) {
  return {field<std::string>(j, "config_hash", file), field<std::uint64_t>(j, "seed", file)};
}

void write_json(const fs::path& file, const json& j) { write_text_atomic(file, j.dump(1) + "\n"); }

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json fidelity_summary(const FidelityCurve& c) {
  return {{"split", c.split},
          {"min_low", c.min_low},
          {"min_high", c.min_high ? json(*c.min_high) : json(nullptr)},
          {"f", c.f}};
}

}  // namespace

// Config ----------------------------------------------------------------------

PipelineConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("config is not valid JSON: ") + e.what());
  }
  Section top(&root, "");
  PipelineConfig cfg;
  for (const char* k : {"detector", "ensemble", "simulation", "calibration", "reconstruction", "estimation",
                        "validation"})
    top.has(k);
  top.finish();

  {
    Section s(sub(root, "detector"), "/detector");
    auto& d = cfg.detector;
    d.eta = s.number("eta", d.eta);
    d.gamma = s.number("gamma", d.gamma);
    d.baseline_mv = s.number("baseline_mv", d.baseline_mv);
    d.peak_spacing_mv = s.number("peak_spacing_mv", d.peak_spacing_mv);
    d.sigma0_mv = s.number("sigma0_mv", d.sigma0_mv);
    d.sigma_slope = s.number("sigma_slope", d.sigma_slope);
    if (s.has("saturation_count")) {
      const auto v = s.unsigned_integer("saturation_count", 0);
      if (v == 0 || v > 0xffffffffULL) throw ConfigError("/detector/saturation_count must be a positive integer");
      d.saturation_count = static_cast<std::uint32_t>(v);
    }
    s.finish();
    d.validate();
  }
  cfg.ensemble = read_ensemble_section(sub(root, "ensemble"));
  {
    Section s(sub(root, "simulation"), "/simulation");
    cfg.seed = s.unsigned_integer("seed", cfg.seed);
    s.finish();
  }
  {
    Section s(sub(root, "calibration"), "/calibration");
    auto& c = cfg.calibration;
    c.method = s.choice("method", "threshold", {"threshold", "area"}) == "area" ? BinningMethod::Area
                                                                               : BinningMethod::Threshold;
    auto& f = c.fit;
    f.bin_width_mv = s.number("bin_width_mv", f.bin_width_mv);
    f.max_peaks = static_cast<int>(s.integer("max_peaks", f.max_peaks));
    f.min_weight = s.number("min_weight", f.min_weight);
    f.seed_min_height = s.number("seed_min_height", f.seed_min_height);
    f.seed_prominence = s.number("seed_prominence", f.seed_prominence);
    f.max_iters = static_cast<int>(s.integer("max_iters", f.max_iters));
    f.reweight_passes = static_cast<int>(s.integer("reweight_passes", f.reweight_passes));
    f.em_passes = static_cast<int>(s.integer("em_passes", f.em_passes));
    s.finish();
    if (!(f.bin_width_mv > 0.0)) throw ConfigError("/calibration/bin_width_mv must be positive");
    if (f.max_iters < 1) throw ConfigError("/calibration/max_iters must be >= 1");
    if (f.reweight_passes < 0) throw ConfigError("/calibration/reweight_passes must be >= 0");
    if (f.em_passes < 0) throw ConfigError("/calibration/em_passes must be >= 0");
  }
  {
    Section s(sub(root, "reconstruction"), "/reconstruction");
    cfg.reconstruction = read_reconstruction(s);
    s.finish();
    cfg.reconstruction.validate();
  }
  {
    Section s(sub(root, "estimation"), "/estimation");
    auto& e = cfg.estimation;
    e.dark_counts = s.boolean("dark_counts", e.dark_counts);
    e.options.gamma_max = s.number("gamma_max", e.options.gamma_max);
    e.options.tol = s.number("tol", e.options.tol);
    e.options.upper_bound_level = s.number("upper_bound_level", e.options.upper_bound_level);
    s.finish();
    if (!(e.options.gamma_max >= 0.0)) throw ConfigError("/estimation/gamma_max must be >= 0");
    if (!(e.options.tol > 0.0)) throw ConfigError("/estimation/tol must be positive");
    if (!(e.options.upper_bound_level > 0.0 && e.options.upper_bound_level < 1.0))
      throw ConfigError("/estimation/upper_bound_level must lie in (0, 1)");
  }
  {
    Section s(sub(root, "validation"), "/validation");
    auto& v = cfg.validation;
    v.split = static_cast<int>(s.integer("split", v.split));
    v.energy_scale = s.number("energy_scale", v.energy_scale);
    v.attenuation_db = s.number("attenuation_db", v.attenuation_db);
    s.finish();
    if (v.split < 0) throw ConfigError("/validation/split must be >= 0");
    if (!(v.energy_scale >= 0.0 && v.energy_scale < 1.0))
      throw ConfigError("/validation/energy_scale must lie in [0, 1)");
    if (!(v.attenuation_db >= 0.0)) throw ConfigError("/validation/attenuation_db must be >= 0");
  }
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_config(text);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

std::string config_to_json(const PipelineConfig& cfg) {
  const auto& d = cfg.detector;
  const auto& f = cfg.calibration.fit;
  const auto& e = cfg.estimation;
  const auto& v = cfg.validation;
  json j = {
      {"detector",
       {{"eta", d.eta},
        {"gamma", d.gamma},
        {"baseline_mv", d.baseline_mv},
        {"peak_spacing_mv", d.peak_spacing_mv},
        {"sigma0_mv", d.sigma0_mv},
        {"sigma_slope", d.sigma_slope},
        {"saturation_count", d.saturation_count ? json(*d.saturation_count) : json(nullptr)}}},
      {"ensemble", {{"probes", ensemble_json(cfg.ensemble)}}},
      {"simulation", {{"seed", cfg.seed}}},
      {"calibration",
       {{"method", method_name(cfg.calibration.method)},
        {"bin_width_mv", f.bin_width_mv},
        {"max_peaks", f.max_peaks},
        {"min_weight", f.min_weight},
        {"seed_min_height", f.seed_min_height},
        {"seed_prominence", f.seed_prominence},
        {"max_iters", f.max_iters},
        {"reweight_passes", f.reweight_passes},
        {"em_passes", f.em_passes}}},
      {"reconstruction", reconstruction_json(cfg.reconstruction)},
      {"estimation",
       {{"dark_counts", e.dark_counts},
        {"gamma_max", e.options.gamma_max},
        {"tol", e.options.tol},
        {"upper_bound_level", e.options.upper_bound_level}}},
      {"validation", {{"split", v.split}, {"energy_scale", v.energy_scale}, {"attenuation_db", v.attenuation_db}}},
  };
  return j.dump(1) + "\n";
}

std::string config_hash(const PipelineConfig& cfg) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : config_to_json(cfg)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void check_lineage(const Lineage& a, const Lineage& b, const std::string& what) {
  if (a.config_hash != b.config_hash)
    throw LineageError(what + " was produced by config " + b.config_hash + ", expected " + a.config_hash);
  if (a.seed != b.seed)
    throw LineageError(what + " was produced with seed " + std::to_string(b.seed) + ", expected " +
                       std::to_string(a.seed));
}

// Files -----------------------------------------------------------------------

void write_text_atomic(const fs::path& file, const std::string& text) {
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, file, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + file.string() + ": " + ec.message());
}

fs::path trace_file_name(std::int64_t probe_id) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "probe_%04lld.csv", static_cast<long long>(probe_id));
  return buf;
}

void write_trace(const fs::path& dir, const AmplitudeTrace& trace, const Lineage& lineage) {
  trace.validate();
  const std::string header = "# probe_id=" + std::to_string(trace.probe_id) + " config_hash=" + lineage.config_hash +
                             " seed=" + std::to_string(lineage.seed) + "\n";
  const fs::path file = dir / trace_file_name(trace.probe_id);
  std::string text = header + "amplitude_mv\n";
  text.reserve(text.size() + trace.size() * 24);
  for (double a : trace.amplitudes) text += fmt17(a) + "\n";
  write_text_atomic(file, text);
  if (trace.truth_counts) {
    std::string t = header + "count\n";
    for (int c : *trace.truth_counts) t += std::to_string(c) + "\n";
    fs::path truth = file;
    truth.replace_extension(".truth.csv");
    write_text_atomic(truth, t);
  }
}

namespace {

// Splits a CSV with '#' comment lines and a one-column header.
struct CsvColumn {
  std::string comment;
  std::vector<std::string_view> values;
  std::string storage;
};

void parse_single_column(const fs::path& file, const std::string& expected_header, CsvColumn& out) {
  out.storage = read_file(file);
  std::string_view all = out.storage;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (!all.empty()) {
    const auto nl = all.find('\n');
    std::string_view line = all.substr(0, nl);
    all = nl == std::string_view::npos ? std::string_view{} : all.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (out.comment.empty()) out.comment = std::string(line.substr(1));
      continue;
    }
    if (!header_seen) {
      if (line != expected_header)
        throw SchemaError(file.string() + ":" + std::to_string(line_no) + ": expected header \"" + expected_header +
                          "\"");
      header_seen = true;
      continue;
    }
    out.values.push_back(line);
  }
  if (!header_seen) throw SchemaError(file.string() + ": missing header \"" + expected_header + "\"");
}

std::string comment_value(const std::string& comment, const std::string& key) {
  std::istringstream ss(comment);
  std::string tok;
  while (ss >> tok)
    if (tok.rfind(key + "=", 0) == 0) return tok.substr(key.size() + 1);
  return {};
}

}  // namespace

AmplitudeTrace read_trace(const fs::path& file, Lineage* lineage) {
  CsvColumn col;
  parse_single_column(file, "amplitude_mv", col);
  AmplitudeTrace t;
  const std::string id = comment_value(col.comment, "probe_id");
  try {
    if (!id.empty()) {
      t.probe_id = std::stoll(id);
    } else {
      const std::string stem = file.stem().string();
      if (stem.rfind("probe_", 0) != 0) throw std::invalid_argument("name");
      t.probe_id = std::stoll(stem.substr(6));
    }
  } catch (const std::exception&) {
    throw SchemaError(file.string() + ": cannot determine the probe id");
  }
  if (lineage) {
    lineage->config_hash = comment_value(col.comment, "config_hash");
    const std::string s = comment_value(col.comment, "seed");
    lineage->seed = s.empty() ? 0 : std::stoull(s);
  }
  t.amplitudes.reserve(col.values.size());
  for (std::size_t i = 0; i < col.values.size(); ++i) {
    const auto v = col.values[i];
    double x = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
      throw SchemaError(file.string() + ": row " + std::to_string(i + 1) + " is not a number");
    t.amplitudes.push_back(x);
  }
  fs::path truth = file;
  truth.replace_extension(".truth.csv");
  if (fs::exists(truth)) {
    CsvColumn tc;
    parse_single_column(truth, "count", tc);
    std::vector<int> counts;
    counts.reserve(tc.values.size());
    for (std::size_t i = 0; i < tc.values.size(); ++i) {
      const auto v = tc.values[i];
      int x = 0;
      const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
      if (r.ec != std::errc() || r.ptr != v.data() + v.size() || x < 0)
        throw SchemaError(truth.string() + ": row " + std::to_string(i + 1) + " is not a count");
      counts.push_back(x);
    }
    t.truth_counts = std::move(counts);
  }
  try {
    t.validate();
  } catch (const DomainError& e) {
    throw SchemaError(file.string() + ": " + e.what());
  }
  return t;
}

std::vector<fs::path> list_trace_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    const bool is_trace = e.is_regular_file() && name.rfind("probe_", 0) == 0 && name.size() > 4 &&
                          name.compare(name.size() - 4, 4, ".csv") == 0 &&
                          name.find(".truth.") == std::string::npos;
    if (is_trace) out.push_back(e.path());
  }
  if (out.empty()) throw IoError("no trace files (probe_*.csv) in " + dir.string());
  std::sort(out.begin(), out.end());
  return out;
}

void write_manifest(const fs::path& dir, const Lineage& lineage, const std::vector<std::string>& files) {
  json j = lineage_json(lineage);
  j["files"] = files;
  write_json(dir / "manifest.json", j);
}

void write_ensemble(const fs::path& file, const ProbeEnsemble& ensemble, const Lineage& lineage) {
  json j = lineage_json(lineage);
  j["probes"] = ensemble_json(ensemble);
  write_json(file, j);
}

ProbeEnsemble read_ensemble(const fs::path& file, Lineage* lineage) {
  const json j = parse_artifact(file);
  if (lineage) *lineage = read_lineage(j, file);
  if (!j.contains("probes") || !j["probes"].is_array()) throw SchemaError(file.string() + ": missing \"probes\"");
  std::vector<Probe> probes;
  for (const auto& o : j["probes"]) {
    Probe p;
    p.id = field<std::int64_t>(o, "id", file);
    p.mean_photons = field<double>(o, "mean_photons", file);
    p.n_pulses = field<std::uint64_t>(o, "n_pulses", file);
    p.attenuation_db = opt_field(o, "attenuation_db");
    probes.push_back(p);
  }
  return ProbeEnsemble(std::move(probes));
}

void write_counts(const fs::path& file, const CountsArtifact& c) {
  const auto& t = c.table;
  json j = lineage_json(c.lineage);
  j["outcomes"] = t.outcomes();
  j["probes"] = t.probes();
  j["probe_ids"] = t.probe_ids();
  j["method"] = c.method;
  j["failed_probes"] = c.failed_probes;
  std::vector<std::uint64_t> rows;
  rows.reserve(static_cast<std::size_t>(t.outcomes()) * t.probes());
  for (int n = 0; n < t.outcomes(); ++n)
    for (std::size_t k = 0; k < t.probes(); ++k) rows.push_back(t.count(n, k));
  j["counts"] = rows;
  write_json(file, j);
}

CountsArtifact read_counts(const fs::path& file) {
  const json j = parse_artifact(file);
  CountsArtifact c;
  c.lineage = read_lineage(j, file);
  const int n_out = field<int>(j, "outcomes", file);
  const auto k = field<std::size_t>(j, "probes", file);
  const auto ids = field<std::vector<std::int64_t>>(j, "probe_ids", file);
  const auto rows = field<std::vector<std::uint64_t>>(j, "counts", file);
  c.method = j.value("method", std::string("threshold"));
  if (j.contains("failed_probes")) c.failed_probes = field<std::vector<std::int64_t>>(j, "failed_probes", file);
  if (n_out < 1 || ids.size() != k || rows.size() != static_cast<std::size_t>(n_out) * k)
    throw SchemaError(file.string() + ": dimensions do not match the array sizes");
  std::vector<std::vector<std::uint64_t>> cols(k, std::vector<std::uint64_t>(static_cast<std::size_t>(n_out)));
  for (int n = 0; n < n_out; ++n)
    for (std::size_t p = 0; p < k; ++p) cols[p][static_cast<std::size_t>(n)] = rows[static_cast<std::size_t>(n) * k + p];
  c.table = CountTable(n_out, ids, std::move(cols));
  return c;
}

void write_fit_report(const fs::path& file, const std::vector<std::int64_t>& probe_ids,
                      const std::vector<ProbeCalibration>& calibrations, const Lineage& lineage) {
  json arr = json::array();
  for (std::size_t i = 0; i < calibrations.size(); ++i) {
    const auto& c = calibrations[i];
    json comps = json::array();
    for (const auto& g : c.fit.components)
      comps.push_back({{"weight", g.weight}, {"mean_mv", g.mean_mv}, {"sigma_mv", g.sigma_mv}});
    arr.push_back({{"probe_id", probe_ids[i]},
                   {"components", comps},
                   {"goodness", c.fit.goodness},
                   {"iterations", c.fit.iterations},
                   {"n_events", c.fit.n_events},
                   {"events_above_fit", c.fit.events_above_fit},
                   {"thresholds_mv", c.thresholds.cut_points_mv},
                   {"binning_cuts_mv", c.binning_cuts.cut_points_mv},
                   {"used_fallback", c.thresholds.used_fallback},
                   {"warnings", c.thresholds.warnings}});
  }
  json j = lineage_json(lineage);
  j["fits"] = arr;
  write_json(file, j);
}

void write_povm(const fs::path& file, const PovmArtifact& p) {
  json j = lineage_json(p.lineage);
  const auto& e = p.povm.entries();
  j["outcomes"] = e.rows();
  j["truncation"] = e.cols();
  std::vector<double> rows;
  rows.reserve(static_cast<std::size_t>(e.size()));
  for (Eigen::Index n = 0; n < e.rows(); ++n)
    for (Eigen::Index m = 0; m < e.cols(); ++m) rows.push_back(e(n, m));
  j["entries"] = rows;
  j["reconstruction"] = reconstruction_json(p.config);
  j["converged"] = p.converged;
  j["iterations"] = p.iterations;
  j["data_term"] = p.data_term;
  j["reg_term"] = p.reg_term;
  write_json(file, j);
}

PovmArtifact read_povm(const fs::path& file) {
  const json j = parse_artifact(file);
  PovmArtifact p;
  p.lineage = read_lineage(j, file);
  const auto n_out = field<Eigen::Index>(j, "outcomes", file);
  const auto m_cnt = field<Eigen::Index>(j, "truncation", file);
  const auto rows = field<std::vector<double>>(j, "entries", file);
  if (n_out < 1 || m_cnt < 1 || rows.size() != static_cast<std::size_t>(n_out * m_cnt))
    throw SchemaError(file.string() + ": dimensions do not match the entry count");
  Matrix e(n_out, m_cnt);
  for (Eigen::Index n = 0; n < n_out; ++n)
    for (Eigen::Index m = 0; m < m_cnt; ++m) e(n, m) = rows[static_cast<std::size_t>(n * m_cnt + m)];
  p.povm = PovmMatrix(std::move(e), true);
  if (j.contains("reconstruction")) {
    Section s(&j["reconstruction"], "/reconstruction");
    try {
      p.config = read_reconstruction(s);
    } catch (const SchemaError& err) {
      throw SchemaError(file.string() + ": " + err.what());
    }
  }
  p.converged = j.value("converged", false);
  p.iterations = j.value("iterations", 0);
  p.data_term = j.value("data_term", 0.0);
  p.reg_term = j.value("reg_term", 0.0);
  return p;
}

void write_convergence_log(const fs::path& file, const std::vector<double>& history, const Lineage& lineage) {
  std::string text = "# config_hash=" + lineage.config_hash + " seed=" + std::to_string(lineage.seed) +
                     "\niteration,objective\n";
  for (std::size_t i = 0; i < history.size(); ++i) text += std::to_string(i) + "," + fmt17(history[i]) + "\n";
  write_text_atomic(file, text);
}

void write_estimate(const fs::path& file, const EstimateArtifact& a) {
  const auto& e = a.estimate;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json per = json::array();
  for (std::size_t i = 0; i < e.per_probe_etas.size(); ++i)
    per.push_back({{"probe_id", e.probe_ids[i]}, {"eta", e.per_probe_etas[i]}});
  json j = lineage_json(a.lineage);
  j["dark_counts"] = a.dark_counts;
  j["eta_hat"] = e.eta_hat;
  j["eta_se"] = opt(e.eta_se);
  j["eta_fisher_se"] = opt(e.eta_fisher_se);
  j["gamma_hat"] = opt(e.gamma_hat);
  j["gamma_se"] = opt(e.gamma_se);
  j["gamma_upper"] = opt(e.gamma_upper);
  j["gamma_at_boundary"] = e.gamma_at_boundary;
  j["loglik"] = std::isfinite(e.loglik) ? json(e.loglik) : json(nullptr);
  j["per_probe"] = per;
  j["warnings"] = e.warnings;
  write_json(file, j);
}

EstimateArtifact read_estimate(const fs::path& file) {
  const json j = parse_artifact(file);
  EstimateArtifact a;
  a.lineage = read_lineage(j, file);
  a.dark_counts = j.value("dark_counts", false);
  auto& e = a.estimate;
  e.eta_hat = field<double>(j, "eta_hat", file);
  e.eta_se = opt_field(j, "eta_se");
  e.eta_fisher_se = opt_field(j, "eta_fisher_se");
  e.gamma_hat = opt_field(j, "gamma_hat");
  e.gamma_se = opt_field(j, "gamma_se");
  e.gamma_upper = opt_field(j, "gamma_upper");
  e.gamma_at_boundary = j.value("gamma_at_boundary", false);
  e.loglik = opt_field(j, "loglik").value_or(-std::numeric_limits<double>::infinity());
  if (j.contains("per_probe"))
    for (const auto& o : j["per_probe"]) {
      e.probe_ids.push_back(field<std::int64_t>(o, "probe_id", file));
      e.per_probe_etas.push_back(field<double>(o, "eta", file));
    }
  if (j.contains("warnings")) e.warnings = field<std::vector<std::string>>(j, "warnings", file);
  if (!(e.eta_hat >= 0.0 && e.eta_hat <= 1.0)) throw SchemaError(file.string() + ": eta_hat outside [0, 1]");
  return a;
}

void write_fidelity_report(const fs::path& file, const FidelityCurve& curve, const std::vector<double>& envelope,
                           const Lineage& lineage) {
  json j = lineage_json(lineage);
  j["truncation"] = curve.f.size();
  j["fidelity"] = fidelity_summary(curve);
  j["sweep_envelope"] = envelope;
  write_json(file, j);
}

void write_comparison_report(const fs::path& file, const ComparisonTable& t, const Lineage& lineage) {
  json arr = json::array();
  for (const auto& p : t.probes)
    arr.push_back({{"probe_id", p.probe_id},
                   {"mean_photons", p.mean_photons},
                   {"measured", p.measured},
                   {"reconstructed", p.reconstructed},
                   {"linear", p.linear},
                   {"max_abs_pr", p.max_abs_pr},
                   {"max_abs_pl", p.max_abs_pl},
                   {"tv_pr", p.tv_pr},
                   {"tv_pl", p.tv_pl}});
  json j = lineage_json(lineage);
  j["eta_hat"] = t.eta_hat;
  j["outcomes"] = t.probes.empty() ? 0 : t.probes.front().measured.size();
  j["probes"] = arr;
  write_json(file, j);
}

void write_sweep_report(const fs::path& file, const SweepResult& s, const Lineage& lineage) {
  json pts = json::array();
  for (const auto& p : s.points)
    pts.push_back({{"energy_scale", p.perturbation.energy_scale},
                   {"attenuation_db", p.perturbation.attenuation_db},
                   {"converged", p.converged},
                   {"fidelity", fidelity_summary(p.curve)}});
  json j = lineage_json(lineage);
  j["baseline"] = fidelity_summary(s.baseline);
  j["points"] = pts;
  j["envelope"] = s.envelope;
  j["envelope_min_low"] = s.envelope_min_low;
  write_json(file, j);
}

}  // namespace pnrtomo
