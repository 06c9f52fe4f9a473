#include "oulab/report.hpp"

#include "oulab/types.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

namespace oulab {

const char *toString(ProbeFlag flag) {
  return flag == ProbeFlag::Unconverged ? "Unconverged" : "Unstable";
}

ProbeReport::ProbeReport(std::string name, std::string claim)
    : name_(std::move(name)), claim_(std::move(claim)) {}

void ProbeReport::setInput(const std::string &key, const std::string &value) {
  inputs_[key] = value;
}

void ProbeReport::setInput(const std::string &key, double value) {
  inputs_[key] = formatDouble(value);
}

void ProbeReport::setSeed(std::uint64_t seed) {
  seed_ = seed;
  inputs_["seed"] = std::to_string(seed);
}

void ProbeReport::setStatistic(const std::string &key, double value) {
  stats_[key] = value;
}

void ProbeReport::setCiWidth(const std::string &key, double value) {
  ci_[key] = value;
}

void ProbeReport::addTable(const std::string &name, Table table) {
  tables_[name] = std::move(table);
}

void ProbeReport::raise(ProbeFlag flag) { flags_.insert(flag); }

void ProbeReport::setPass(const std::string &key, bool value) {
  pass_[key] = value;
}

std::map<std::string, bool> ProbeReport::passFlags() const {
  std::map<std::string, bool> out = pass_;
  if (!flags_.empty()) {
    for (auto &kv : out) {
      kv.second = false;
    }
  }
  return out;
}

double ProbeReport::statistic(const std::string &key) const {
  const auto it = stats_.find(key);
  if (it == stats_.end()) {
    throw Error(ErrorCode::InvalidArgument, "no statistic " + key);
  }
  return it->second;
}

bool ProbeReport::passed() const {
  if (!flags_.empty() || pass_.empty()) {
    return false;
  }
  for (const auto &kv : pass_) {
    if (!kv.second) {
      return false;
    }
  }
  return true;
}

std::string fingerprintOf(const std::map<std::string, std::string> &config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&](const std::string &s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto &[k, v] : config) {
    mix(k);
    mix(v);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ProbeReport::fingerprint() const {
  auto config = inputs_;
  config["probe"] = name_;
  return fingerprintOf(config);
}

std::string formatDouble(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

nlohmann::json jsonNumber(double v) {
  if (std::isfinite(v)) {
    return v;
  }
  return formatDouble(v);
}

} // namespace

std::string ProbeReport::toJson() const {
  nlohmann::ordered_json j;
  j["name"] = name_;
  j["claim"] = claim_;
  j["fingerprint"] = fingerprint();
  j["seed"] = seed_;
  j["inputs"] = inputs_;
  nlohmann::ordered_json stats = nlohmann::ordered_json::object();
  for (const auto &[k, v] : stats_) {
    stats[k] = jsonNumber(v);
  }
  j["statistics"] = stats;
  nlohmann::ordered_json ci = nlohmann::ordered_json::object();
  for (const auto &[k, v] : ci_) {
    ci[k] = jsonNumber(v);
  }
  j["ci_widths"] = ci;
  nlohmann::ordered_json flags = nlohmann::ordered_json::array();
  for (ProbeFlag f : flags_) {
    flags.push_back(toString(f));
  }
  j["flags"] = flags;
  j["pass_flags"] = passFlags();
  j["pass"] = passed();
  nlohmann::ordered_json tables = nlohmann::ordered_json::object();
  for (const auto &[k, t] : tables_) {
    tables[k] = {{"claim", t.claim}, {"columns", t.columns},
                 {"rows", t.rows.size()}};
  }
  j["tables"] = tables;
  return j.dump(2) + "\n";
}

std::string tableToCsv(const Table &table, const std::string &fingerprint) {
  std::string out = "# " + table.claim + "; fingerprint " + fingerprint + "\n";
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    out += (i ? "," : "") + table.columns[i];
  }
  out += "\n";
  for (const auto &row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += (i ? "," : "") + formatDouble(row[i]);
    }
    out += "\n";
  }
  return out;
}

namespace {

void writeStaged(const std::filesystem::path &path,
                 const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write " + path.string());
  }
  out << content;
  out.close();
  if (!out) {
    throw Error(ErrorCode::Io, "write failed for " + path.string());
  }
}

} // namespace

void writeFileAtomic(const std::string &path, const std::string &content) {
  const std::filesystem::path target(path);
  const std::filesystem::path staged = target.string() + ".partial";
  try {
    writeStaged(staged, content);
    std::filesystem::rename(staged, target);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(staged, ec);
    throw;
  }
}

std::vector<std::string> writeReport(const ProbeReport &report,
                                     const std::string &dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::Io, "cannot create " + dir);
  }
  std::vector<std::pair<fs::path, std::string>> files;
  files.emplace_back(fs::path(dir) / (report.name() + ".json"),
                     report.toJson());
  for (const auto &[name, table] : report.tables()) {
    files.emplace_back(fs::path(dir) / (name + ".csv"),
                       tableToCsv(table, report.fingerprint()));
  }
  std::vector<fs::path> staged;
  try {
    for (const auto &[path, content] : files) {
      staged.push_back(path.string() + ".partial");
      writeStaged(staged.back(), content);
    }
    for (std::size_t i = 0; i < files.size(); ++i) {
      fs::rename(staged[i], files[i].first);
    }
  } catch (...) {
    for (const auto &p : staged) {
      fs::remove(p, ec);
    }
    throw;
  }
  std::vector<std::string> out;
  for (const auto &f : files) {
    out.push_back(f.first.string());
  }
  return out;
}

} // namespace oulab
