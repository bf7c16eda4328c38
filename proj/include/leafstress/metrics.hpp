#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace leafstress {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t k);

  std::size_t k() const noexcept { return k_; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const;
  std::uint64_t total() const noexcept { return total_; }
  std::uint64_t row_sum(std::size_t c) const;
  std::uint64_t col_sum(std::size_t c) const;

  void update(std::size_t truth, std::size_t pred);
  void merge(const ConfusionMatrix& other);

  static ConfusionMatrix from_counts(const std::vector<std::vector<std::uint64_t>>& rows);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

double accuracy(const ConfusionMatrix& cm);

struct PrecisionRecall {
  double precision;
  double recall;
};

/// Unweighted mean over all k classes; a class with a zero denominator
/// contributes 0.
PrecisionRecall macro_precision_recall(const ConfusionMatrix& cm);

struct TaskReport {
  std::string task;
  ConfusionMatrix cm;
  std::vector<std::string> class_names;
};

/// Writes confusion_<task>.csv for each task and metrics.csv into `dir`.
void report_write(const std::vector<TaskReport>& tasks, const std::filesystem::path& dir);

ConfusionMatrix read_confusion_csv(const std::filesystem::path& path);

struct MetricsRow {
  std::string task;
  double accuracy;
  double precision;
  double recall;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

/// Rows of metrics.csv; values carry the file's four decimals.
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

}  // namespace leafstress
