#include "legiteam/cli.hpp"

#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

namespace legiteam {
namespace {

std::string fmt(const char* format, ...) {
  char buffer[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buffer, sizeof(buffer), format, args);
  va_end(args);
  return std::string(buffer);
}

std::string join_ints(const std::vector<int>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out.push_back(sep);
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : text) {
    if (c == sep) {
      parts.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  parts.push_back(current);
  return parts;
}

int parse_int_field(const std::string& text, int line, const char* field) {
  try {
    std::size_t used = 0;
    const int value = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw std::invalid_argument(fmt("dataset line %d: bad %s value '%s'", line, field, text.c_str()));
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return buffer.str();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

}  // namespace

std::string CliPaths::pursuit_cache_path(int grid) const {
  return cache_dir() + fmt("/pursuit_g%d.bin", grid);
}

std::string CliPaths::foraging_cache_path(int grid) const {
  return cache_dir() + fmt("/foraging_g%d.bin", grid);
}

std::string CliPaths::report_path(const std::string& metric) const {
  return out_dir + "/report_" + metric + ".csv";
}

CliConfig config_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  static const std::set<std::string> allowed = {
      "environment", "grid_sizes", "episodes",  "master_seed",        "beta",  "gamma",
      "step_limit",  "conditions", "solve_tol", "allow_large_pursuit", "output"};
  for (const auto& item : j.items()) {
    if (allowed.find(item.key()) == allowed.end()) {
      throw std::invalid_argument("config: unknown key '" + item.key() + "'");
    }
  }
  CliConfig cfg;
  ExperimentConfig& e = cfg.experiment;
  e.grid_sizes = {5};
  try {
    if (j.contains("environment")) e.environment = j.at("environment").get<std::string>();
    if (j.contains("grid_sizes")) e.grid_sizes = j.at("grid_sizes").get<std::vector<int>>();
    if (j.contains("episodes")) e.episodes_per_cell = j.at("episodes").get<int>();
    if (j.contains("master_seed")) e.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("beta")) e.beta = j.at("beta").get<double>();
    if (j.contains("gamma")) e.gamma = j.at("gamma").get<double>();
    if (j.contains("step_limit")) e.step_limit = j.at("step_limit").get<int>();
    if (j.contains("solve_tol")) e.solve_tol = j.at("solve_tol").get<double>();
    if (j.contains("allow_large_pursuit")) e.allow_large_pursuit = j.at("allow_large_pursuit").get<bool>();
    if (j.contains("conditions")) {
      e.conditions.clear();
      for (const auto& c : j.at("conditions")) e.conditions.push_back(parse_condition(c.get<std::string>()));
    }
    if (j.contains("output")) {
      const auto& o = j.at("output");
      if (o.is_string()) {
        cfg.out_dir = o.get<std::string>();
      } else if (o.is_object() && o.contains("dir")) {
        cfg.out_dir = o.at("dir").get<std::string>();
      } else {
        throw std::invalid_argument("config: output must be a path or an object with key 'dir'");
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw std::invalid_argument(std::string("config: ") + ex.what());
  }
  e.validate();
  return cfg;
}

CliConfig load_config_file(const std::string& path) {
  return config_from_json_text(read_text_file(path));
}

std::string dataset_csv(const ExperimentDataset& dataset) {
  std::string out = "scenario,grid,condition,success,total_steps,inference_steps,never_inferred\n";
  for (const EpisodeRecord& r : dataset.records) {
    // A '!' suffix marks a segment that never reached a stable correct
    // declaration; the report path must skip those, so the flag has to
    // survive the CSV round trip. The count column is a redundant check.
    std::string steps;
    int never = 0;
    for (std::size_t i = 0; i < r.objectives.size(); ++i) {
      if (i > 0) steps.push_back(';');
      steps += std::to_string(r.objectives[i].steps_to_stable);
      if (r.objectives[i].never_inferred) {
        steps.push_back('!');
        ++never;
      }
    }
    out += fmt("%d,%d,%s,%d,%d,", r.scenario_id, r.grid, condition_name(r.condition), r.success ? 1 : 0,
               r.total_steps);
    out += steps;
    out += fmt(",%d\n", never);
  }
  return out;
}

std::vector<EpisodeRecord> parse_dataset_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset line 1: missing header");
  if (line == "scenario,grid,condition,success,total_steps,inference_steps,never_inferred\r") {
    line.pop_back();
  }
  if (line != "scenario,grid,condition,success,total_steps,inference_steps,never_inferred") {
    throw std::invalid_argument("dataset line 1: unexpected header '" + line + "'");
  }
  std::vector<EpisodeRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split(line, ',');
    if (fields.size() != 7) {
      throw std::invalid_argument(fmt("dataset line %d: expected 7 fields, got %zu", line_no, fields.size()));
    }
    EpisodeRecord r;
    r.scenario_id = parse_int_field(fields[0], line_no, "scenario");
    r.grid = parse_int_field(fields[1], line_no, "grid");
    try {
      r.condition = parse_condition(fields[2]);
    } catch (const std::exception&) {
      throw std::invalid_argument(fmt("dataset line %d: bad condition '%s'", line_no, fields[2].c_str()));
    }
    const int success = parse_int_field(fields[3], line_no, "success");
    if (success != 0 && success != 1) {
      throw std::invalid_argument(fmt("dataset line %d: success must be 0 or 1", line_no));
    }
    r.success = success == 1;
    r.total_steps = parse_int_field(fields[4], line_no, "total_steps");
    int flagged = 0;
    if (!fields[5].empty()) {
      for (std::string part : split(fields[5], ';')) {
        ObjectiveMetric m;
        if (!part.empty() && part.back() == '!') {
          m.never_inferred = true;
          ++flagged;
          part.pop_back();
        }
        m.steps_to_stable = parse_int_field(part, line_no, "inference_steps");
        r.objectives.push_back(m);
      }
    }
    const int never = parse_int_field(fields[6], line_no, "never_inferred");
    if (never != flagged) {
      throw std::invalid_argument(fmt("dataset line %d: never_inferred count disagrees with flags", line_no));
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::string summary_text(const ExperimentConfig& config, const StatReport& report) {
  std::string s = "run summary\n";
  s += fmt("environment: %s\n", config.environment.c_str());
  s += fmt("episodes_per_cell: %d\n", config.resolved_episodes());
  s += fmt("master_seed: %llu\n", static_cast<unsigned long long>(config.master_seed));
  s += fmt("beta: %.6g\n", config.beta);
  s += fmt("gamma: %.6g\n", config.gamma);
  s += fmt("step_limit: %d\n", config.resolved_step_limit());
  s += fmt("solve_tol: %.6g\n", config.solve_tol);
  s += fmt("exclusions: %zu\n", report.exclusion_count);
  for (const StatRow& row : report.rows) {
    const CellSummary& c = row.cell;
    s += fmt("\ngrid %d metric %s\n", row.grid, row.metric.c_str());
    s += fmt("  optimal: n=%zu mean=%.4f se=%.4f\n", c.n_optimal, c.mean_optimal, c.se_optimal);
    s += fmt("  legible: n=%zu mean=%.4f se=%.4f\n", c.n_legible, c.mean_legible, c.se_legible);
    s += fmt("  mwu: U=%.1f p=%.6g%s%s\n", c.mwu.u, c.mwu.p, c.mwu.exact ? " exact" : "",
             c.mwu.degenerate ? " degenerate" : "");
    if (c.has_ks) {
      s += fmt("  normality: optimal D=%.4f p=%.6g%s legible D=%.4f p=%.6g%s\n", c.ks_optimal.d,
               c.ks_optimal.p, c.ks_optimal.degenerate ? " degenerate" : "", c.ks_legible.d,
               c.ks_legible.p, c.ks_legible.degenerate ? " degenerate" : "");
    } else {
      s += "  normality: skipped (n < 4)\n";
    }
  }
  for (const std::string& w : report.warnings) s += fmt("warning: %s\n", w.c_str());
  return s;
}

std::map<std::string, std::string> report_tables(const StatReport& report) {
  std::map<std::string, std::string> tables;
  for (const std::string& metric : kMetricNames) {
    std::string table = "grid,condition,mean,se,U,p,sig\n";
    bool any = false;
    for (const StatRow& row : report.rows) {
      if (row.metric != metric) continue;
      any = true;
      const CellSummary& c = row.cell;
      const char* sig = c.mwu.p < 0.05 ? "*" : "-";
      table += fmt("%d,optimal,%.4f,%.4f,%.1f,%.6g,%s\n", row.grid, c.mean_optimal, c.se_optimal,
                   c.mwu.u, c.mwu.p, sig);
      table += fmt("%d,legible,%.4f,%.4f,%.1f,%.6g,%s\n", row.grid, c.mean_legible, c.se_legible,
                   c.mwu.u, c.mwu.p, sig);
    }
    if (any) tables.emplace(metric, std::move(table));
  }
  return tables;
}

std::string manifest_json_text(const ExperimentDataset& dataset, const CliPaths& paths) {
  const ExperimentConfig& c = dataset.config;
  nlohmann::ordered_json m;
  m["tool_version"] = "1.0.0";
  std::vector<std::string> condition_names;
  for (Condition cond : c.conditions) condition_names.emplace_back(condition_name(cond));
  m["config"] = {{"environment", c.environment},
                 {"grid_sizes", c.grid_sizes},
                 {"conditions", condition_names},
                 {"episodes_per_cell", c.resolved_episodes()},
                 {"master_seed", c.master_seed},
                 {"beta", c.beta},
                 {"gamma", c.gamma},
                 {"step_limit", c.resolved_step_limit()},
                 {"solve_tol", c.solve_tol},
                 {"allow_large_pursuit", c.allow_large_pursuit}};
  m["timings_seconds"] = nlohmann::ordered_json::object();
  for (const auto& [stage, seconds] : dataset.timings) m["timings_seconds"][stage] = seconds;
  m["exclusions"] = dataset.exclusions;
  m["outputs"] = {{"episodes", paths.csv_path()},
                  {"summary", paths.summary_path()},
                  {"scenarios", paths.scenarios_path()}};
  return m.dump(2) + "\n";
}

std::string scenarios_text(const ExperimentConfig& config) {
  std::string s;
  for (int grid : config.grid_sizes) {
    if (config.is_foraging()) {
      const std::vector<ForagingLayout> layouts = presample_foraging(config, grid);
      for (std::size_t i = 0; i < layouts.size(); ++i) {
        const ForagingLayout& l = layouts[i];
        s += fmt("scenario=%zu grid=%d ", i + 1, grid);
        s += "candidates=" + join_ints(l.candidate_cells, ',');
        s += " active=" + join_ints(l.active, ',');
        s += " sequence=" + join_ints(l.capture_sequence, ',');
        s += fmt(" starts=%d,%d\n", l.agent_starts[0], l.agent_starts[1]);
      }
    } else {
      const std::vector<PursuitScenario> scenarios = presample_pursuit(config, grid);
      for (std::size_t i = 0; i < scenarios.size(); ++i) {
        const PursuitScenario& sc = scenarios[i];
        s += fmt("scenario=%zu grid=%d ", i + 1, grid);
        s += "hunters=" + join_ints(sc.hunter_starts, ',');
        s += " preys=" + join_ints(sc.prey_starts, ',');
        s += " sequence=" + join_ints(sc.capture_sequence, ',') + "\n";
      }
    }
  }
  return s;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

constexpr std::uint32_t kCacheVersion = 1;
constexpr std::uint32_t kKindPursuit = 1;
constexpr std::uint32_t kKindForaging = 2;
const char kCacheMagic[4] = {'L', 'G', 'T', 'B'};

template <typename T>
void append_pod(std::string& buffer, const T& value) {
  buffer.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void append_array(std::string& buffer, const std::vector<T>& values) {
  buffer.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(T));
}

// Sequential reader over a cache payload; throws on overrun.
struct Cursor {
  const char* p;
  const char* end;
  const std::string& path;

  template <typename T>
  T read() {
    if (p + sizeof(T) > end) throw IoError("truncated cache payload: " + path);
    T value;
    std::memcpy(&value, p, sizeof(T));
    p += sizeof(T);
    return value;
  }

  template <typename T>
  std::vector<T> read_array(std::size_t count) {
    if (p + count * sizeof(T) > end) throw IoError("truncated cache payload: " + path);
    std::vector<T> values(count);
    std::memcpy(values.data(), p, count * sizeof(T));
    p += count * sizeof(T);
    return values;
  }
};

void write_cache_file(const std::string& path, std::uint32_t kind, std::uint64_t param_hash,
                      const std::string& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open cache for writing: " + path);
  out.write(kCacheMagic, 4);
  const std::uint32_t version = kCacheVersion;
  const std::uint64_t size = payload.size();
  const std::uint64_t checksum = fnv1a64(payload.data(), payload.size());
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&kind), sizeof(kind));
  out.write(reinterpret_cast<const char*>(&param_hash), sizeof(param_hash));
  out.write(reinterpret_cast<const char*>(&size), sizeof(size));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
  if (!out) throw IoError("cache write failed: " + path);
}

std::string read_cache_file(const std::string& path, std::uint32_t expected_kind,
                            std::uint64_t expected_hash) {
  const std::string raw = read_text_file(path);
  const std::size_t header = 4 + sizeof(std::uint32_t) * 2 + sizeof(std::uint64_t) * 2;
  if (raw.size() < header + sizeof(std::uint64_t)) throw IoError("truncated cache file: " + path);
  if (std::memcmp(raw.data(), kCacheMagic, 4) != 0) throw IoError("not a policy cache (bad magic): " + path);
  std::uint32_t version, kind;
  std::uint64_t param_hash, size;
  std::memcpy(&version, raw.data() + 4, sizeof(version));
  std::memcpy(&kind, raw.data() + 8, sizeof(kind));
  std::memcpy(&param_hash, raw.data() + 12, sizeof(param_hash));
  std::memcpy(&size, raw.data() + 20, sizeof(size));
  if (version != kCacheVersion) throw IoError(fmt("unsupported cache version %u: ", version) + path);
  if (kind != expected_kind) throw IoError("unexpected cache kind: " + path);
  if (param_hash != expected_hash) throw IoError("parameter hash mismatch (stale cache): " + path);
  if (raw.size() != header + size + sizeof(std::uint64_t)) throw IoError("truncated cache file: " + path);
  std::uint64_t checksum;
  std::memcpy(&checksum, raw.data() + header + size, sizeof(checksum));
  if (checksum != fnv1a64(raw.data() + header, size)) {
    throw IoError("checksum mismatch (corrupted cache): " + path);
  }
  return raw.substr(header, size);
}

}  // namespace

std::uint64_t pursuit_param_hash(int grid, double gamma, double solve_tol) {
  const std::string key = fmt("pursuit|grid=%d|gamma=%.17g|tol=%.17g|fmt=3", grid, gamma, solve_tol);
  return fnv1a64(key.data(), key.size());
}

void write_pursuit_cache(const std::string& path, const PursuitModel& model, std::uint64_t param_hash) {
  std::string payload;
  const std::int64_t n_states = model.space.n_states;
  payload.reserve(64 + static_cast<std::size_t>(n_states) * kPursuitActionCount * 16);
  append_pod(payload, static_cast<std::int32_t>(model.width));
  append_pod(payload, static_cast<std::int32_t>(model.height));
  append_pod(payload, model.gamma);
  append_pod(payload, n_states);
  append_array(payload, model.m_table);
  append_array(payload, model.induced_next);
  append_array(payload, model.steps_left);
  append_array(payload, model.leader_opt);
  append_array(payload, model.follower_opt);
  write_cache_file(path, kKindPursuit, param_hash, payload);
}

PursuitModel read_pursuit_cache(const std::string& path, std::uint64_t expected_hash) {
  const std::string payload = read_cache_file(path, kKindPursuit, expected_hash);
  Cursor cur{payload.data(), payload.data() + payload.size(), path};
  PursuitModel model;
  model.width = cur.read<std::int32_t>();
  model.height = cur.read<std::int32_t>();
  model.gamma = cur.read<double>();
  const std::int64_t n_states = cur.read<std::int64_t>();
  model.space = pursuit_state_space(model.width, model.height);
  if (n_states != model.space.n_states) throw IoError("cache state count mismatch: " + path);
  const std::size_t rows = static_cast<std::size_t>(n_states) * kPursuitActionCount;
  model.m_table = cur.read_array<double>(rows);
  model.induced_next = cur.read_array<int>(rows);
  model.steps_left = cur.read_array<int>(static_cast<std::size_t>(n_states));
  model.leader_opt = cur.read_array<int>(static_cast<std::size_t>(n_states));
  model.follower_opt = cur.read_array<int>(static_cast<std::size_t>(n_states));
  if (cur.p != cur.end) throw IoError("cache payload has trailing bytes: " + path);
  return model;
}

std::uint64_t foraging_param_hash(int grid, const ExperimentConfig& config) {
  const std::string key =
      fmt("foraging|grid=%d|gamma=%.17g|beta=%.17g|tol=%.17g|seed=%llu|episodes=%d|fmt=1", grid,
          config.gamma, config.beta, config.solve_tol,
          static_cast<unsigned long long>(config.master_seed), config.resolved_episodes());
  return fnv1a64(key.data(), key.size());
}

void write_foraging_cache(const std::string& path, const std::vector<ForagingPolicyEntry>& entries,
                          std::uint64_t param_hash) {
  std::string payload;
  append_pod(payload, static_cast<std::int64_t>(entries.size()));
  for (const ForagingPolicyEntry& e : entries) {
    append_pod(payload, static_cast<std::int32_t>(e.scenario_id));
    append_pod(payload, e.present_mask);
    append_pod(payload, static_cast<std::int32_t>(e.goal));
    append_pod(payload, static_cast<std::int64_t>(e.legible.size()));
    if (e.joint_greedy.size() != e.legible.size()) {
      throw std::invalid_argument("foraging cache entry: policy sizes differ");
    }
    append_array(payload, e.legible);
    append_array(payload, e.joint_greedy);
  }
  write_cache_file(path, kKindForaging, param_hash, payload);
}

std::vector<ForagingPolicyEntry> read_foraging_cache(const std::string& path, std::uint64_t expected_hash) {
  const std::string payload = read_cache_file(path, kKindForaging, expected_hash);
  Cursor cur{payload.data(), payload.data() + payload.size(), path};
  const std::int64_t count = cur.read<std::int64_t>();
  std::vector<ForagingPolicyEntry> entries;
  entries.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    ForagingPolicyEntry e;
    e.scenario_id = cur.read<std::int32_t>();
    e.present_mask = cur.read<std::uint32_t>();
    e.goal = cur.read<std::int32_t>();
    const std::int64_t n_states = cur.read<std::int64_t>();
    e.legible = cur.read_array<int>(static_cast<std::size_t>(n_states));
    e.joint_greedy = cur.read_array<int>(static_cast<std::size_t>(n_states));
    entries.push_back(std::move(e));
  }
  if (cur.p != cur.end) throw IoError("cache payload has trailing bytes: " + path);
  return entries;
}

int cmd_solve(const CliConfig& config) {
  const ExperimentConfig& e = config.experiment;
  e.validate();
  CliPaths paths{config.out_dir};
  ensure_dir(paths.cache_dir());
  for (int grid : e.grid_sizes) {
    if (!e.is_foraging()) {
      const std::string path = paths.pursuit_cache_path(grid);
      const std::uint64_t hash = pursuit_param_hash(grid, e.gamma, e.solve_tol);
      try {
        read_pursuit_cache(path, hash);
        std::cout << "cache hit: " << path << "\n";
        continue;
      } catch (const IoError&) {
      }
      const PursuitModel model = build_pursuit_model(grid, grid, e.gamma, e.solve_tol, e.allow_large_pursuit);
      write_pursuit_cache(path, model, hash);
      std::cout << "solved and cached: " << path << "\n";
    } else {
      const std::string path = paths.foraging_cache_path(grid);
      const std::uint64_t hash = foraging_param_hash(grid, e);
      try {
        read_foraging_cache(path, hash);
        std::cout << "cache hit: " << path << "\n";
        continue;
      } catch (const IoError&) {
      }
      const std::vector<ForagingLayout> layouts = presample_foraging(e, grid);
      std::vector<ForagingPolicyEntry> entries;
      for (std::size_t i = 0; i < layouts.size(); ++i) {
        ForagingPlanner planner(layouts[i], e.gamma, e.beta, e.solve_tol);
        std::uint32_t mask = 0;
        for (int f = 0; f < layouts[i].n_foods(); ++f) mask |= (1u << f);
        for (int goal : layouts[i].capture_sequence) {
          const auto& tables = planner.legible_stage(mask);
          const int k = ForagingPlanner::goal_position(tables, goal);
          ForagingPolicyEntry entry;
          entry.scenario_id = static_cast<int>(i) + 1;
          entry.present_mask = mask;
          entry.goal = goal;
          entry.legible = tables.per_goal[static_cast<std::size_t>(k)].legible.actions;
          entry.joint_greedy = tables.per_goal[static_cast<std::size_t>(k)].joint_greedy.actions;
          entries.push_back(std::move(entry));
          mask &= ~(1u << goal);
        }
      }
      write_foraging_cache(path, entries, hash);
      std::cout << "solved and cached: " << path << "\n";
    }
  }
  return 0;
}

int cmd_run(const CliConfig& config) {
  const ExperimentConfig& e = config.experiment;
  e.validate();
  CliPaths paths{config.out_dir};
  ensure_dir(paths.out_dir);
  ensure_dir(paths.cache_dir());

  PursuitModelStore store;
  if (!e.is_foraging()) {
    for (int grid : e.grid_sizes) {
      const std::string path = paths.pursuit_cache_path(grid);
      try {
        store.by_grid.emplace(grid, read_pursuit_cache(path, pursuit_param_hash(grid, e.gamma, e.solve_tol)));
        std::cout << "loaded cache: " << path << "\n";
      } catch (const IoError&) {
      }
    }
  }

  const ExperimentDataset dataset = run_experiment(e, &store);
  for (int grid : store.built) {
    const std::string path = paths.pursuit_cache_path(grid);
    write_pursuit_cache(path, store.by_grid.at(grid), pursuit_param_hash(grid, e.gamma, e.solve_tol));
    std::cout << "cached: " << path << "\n";
  }

  write_text_file(paths.scenarios_path(), scenarios_text(e));
  write_text_file(paths.csv_path(), dataset_csv(dataset));
  const StatReport report = summarize_dataset(dataset);
  write_text_file(paths.summary_path(), summary_text(e, report));
  write_text_file(paths.manifest_path(), manifest_json_text(dataset, paths));

  std::cout << "episodes: " << dataset.records.size() << "\n";
  std::cout << "exclusions: " << dataset.exclusions.size() << "\n";
  std::cout << "wrote " << paths.csv_path() << ", " << paths.summary_path() << ", "
            << paths.manifest_path() << "\n";
  return 0;
}

int cmd_report(const std::string& dataset_path, const std::string& out_dir) {
  const std::vector<EpisodeRecord> records = parse_dataset_csv(read_text_file(dataset_path));
  if (records.empty()) throw std::invalid_argument("dataset has no data rows: " + dataset_path);
  const StatReport report = summarize_records(records, 0);
  const std::map<std::string, std::string> tables = report_tables(report);
  CliPaths paths{out_dir};
  ensure_dir(out_dir);
  for (const auto& [metric, table] : tables) {
    write_text_file(paths.report_path(metric), table);
    std::cout << "# metric " << metric << "\n" << table;
  }
  for (const std::string& w : report.warnings) std::cout << "warning: " << w << "\n";
  return 0;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"legible multi-agent decision-making toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string env_override;
  std::string grids_csv;
  std::string conditions_csv;
  std::string seed_text;
  std::string out_override;
  int episodes_override = -1;
  int step_limit_override = -1;
  double beta_override = 0.0;
  double gamma_override = 0.0;
  bool allow_large = false;
  std::string data_path;
  std::string report_out = "out";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--env", env_override, "environment: foraging | pursuit")
        ->check(CLI::IsMember({"foraging", "pursuit"}));
    sub->add_option("--grids", grids_csv, "comma-separated grid sizes");
    sub->add_option("--episodes", episodes_override, "episodes per (grid, condition) cell");
    sub->add_option("--seed", seed_text, "master seed");
    sub->add_option("--out", out_override, "output directory");
    sub->add_option("--condition", conditions_csv, "comma-separated condition list");
    sub->add_option("--beta", beta_override, "legibility and inference temperature");
    sub->add_option("--gamma", gamma_override, "discount factor");
    sub->add_option("--step-limit", step_limit_override, "episode step limit");
    sub->add_flag("--allow-large-pursuit", allow_large, "permit exact pursuit solves beyond 10x10");
  };

  CLI::App* solve = app.add_subcommand("solve", "solve policies and fill the cache");
  add_common(solve);
  CLI::App* run = app.add_subcommand("run", "run the paired-condition experiment");
  add_common(run);
  CLI::App* report = app.add_subcommand("report", "emit plot-data tables from an episode CSV");
  report->add_option("--data", data_path, "episodes.csv produced by run")->required();
  report->add_option("--out", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (report->parsed()) return cmd_report(data_path, report_out);

    CliConfig cfg;
    if (!config_path.empty()) cfg = load_config_file(config_path);
    if (!env_override.empty()) cfg.experiment.environment = env_override;
    if (!grids_csv.empty()) {
      cfg.experiment.grid_sizes.clear();
      for (const std::string& part : split(grids_csv, ',')) {
        cfg.experiment.grid_sizes.push_back(parse_int_field(part, 0, "grid"));
      }
    }
    if (!conditions_csv.empty()) {
      cfg.experiment.conditions.clear();
      for (const std::string& part : split(conditions_csv, ',')) {
        cfg.experiment.conditions.push_back(parse_condition(part));
      }
    }
    if (!seed_text.empty()) {
      try {
        cfg.experiment.master_seed = std::stoull(seed_text);
      } catch (const std::exception&) {
        throw std::invalid_argument("bad --seed value: " + seed_text);
      }
    }
    if (episodes_override >= 0) cfg.experiment.episodes_per_cell = episodes_override;
    if (step_limit_override >= 0) cfg.experiment.step_limit = step_limit_override;
    if (beta_override != 0.0) cfg.experiment.beta = beta_override;
    if (gamma_override != 0.0) cfg.experiment.gamma = gamma_override;
    if (allow_large) cfg.experiment.allow_large_pursuit = true;
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (cfg.experiment.grid_sizes.empty()) cfg.experiment.grid_sizes = {5};
    cfg.experiment.validate();

    if (solve->parsed()) return cmd_solve(cfg);
    return cmd_run(cfg);
  } catch (const IoError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}

}  // namespace legiteam
