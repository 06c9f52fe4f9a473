#ifndef OULAB_REPORT_HPP
#define OULAB_REPORT_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oulab {

/// A curve destined for CSV. `claim` names the statement it probes and is
/// written as a comment line above the header.
struct Table {
  std::string claim;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

enum class ProbeFlag { Unconverged, Unstable };
const char *toString(ProbeFlag flag);

/// Outcome of one probe. Deterministic given inputs and seed; runtime is
/// kept out of the serialised form for that reason.
class ProbeReport {
public:
  ProbeReport(std::string name, std::string claim);

  const std::string &name() const { return name_; }
  const std::string &claim() const { return claim_; }

  void setInput(const std::string &key, const std::string &value);
  void setInput(const std::string &key, double value);
  void setSeed(std::uint64_t seed);
  void setStatistic(const std::string &key, double value);
  void setCiWidth(const std::string &key, double value);
  void addTable(const std::string &name, Table table);
  void raise(ProbeFlag flag);
  /// Recorded as false whenever a flag is raised, before or after.
  void setPass(const std::string &key, bool value);
  void setRuntime(double seconds) { runtime_ = seconds; }

  const std::map<std::string, std::string> &inputs() const { return inputs_; }
  const std::map<std::string, double> &statistics() const { return stats_; }
  const std::map<std::string, double> &ciWidths() const { return ci_; }
  const std::map<std::string, Table> &tables() const { return tables_; }
  std::map<std::string, bool> passFlags() const;
  const std::set<ProbeFlag> &flags() const { return flags_; }
  double statistic(const std::string &key) const;
  std::uint64_t seed() const { return seed_; }
  double runtime() const { return runtime_; }

  /// All pass flags true, at least one present, and no flag raised.
  bool passed() const;
  /// FNV-1a hash of the canonicalised inputs, as 16 hex digits.
  std::string fingerprint() const;
  std::string toJson() const;

private:
  std::string name_, claim_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, double> stats_, ci_;
  std::map<std::string, bool> pass_;
  std::map<std::string, Table> tables_;
  std::set<ProbeFlag> flags_;
  std::uint64_t seed_ = 0;
  double runtime_ = 0;
};

std::string fingerprintOf(const std::map<std::string, std::string> &config);

/// Shortest round-trip decimal form of a double.
std::string formatDouble(double v);

std::string tableToCsv(const Table &table, const std::string &fingerprint);

/// Writes <dir>/<name>.json and one <dir>/<table>.csv per table. Every file
/// is staged under a temporary name and renamed only once all were written;
/// on failure the staged files are removed. Returns the written paths.
std::vector<std::string> writeReport(const ProbeReport &report,
                                     const std::string &dir);

/// Atomic single-file write.
void writeFileAtomic(const std::string &path, const std::string &content);

} // namespace oulab

#endif // OULAB_REPORT_HPP
