#include "leafstress/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "leafstress/error.hpp"

namespace leafstress {

ConfusionMatrix::ConfusionMatrix(std::size_t k) : k_(k), counts_(k * k, 0) {
  if (k == 0) throw Error(ErrorKind::InvalidParameter, "confusion matrix needs at least one class");
}

std::uint64_t ConfusionMatrix::at(std::size_t truth, std::size_t pred) const {
  if (truth >= k_ || pred >= k_) throw Error(ErrorKind::IndexOutOfRange, "confusion index out of range");
  return counts_[truth * k_ + pred];
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < k_; ++j) s += at(c, j);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < k_; ++i) s += at(i, c);
  return s;
}

void ConfusionMatrix::update(std::size_t truth, std::size_t pred) {
  if (truth >= k_ || pred >= k_)
    throw Error(ErrorKind::IndexOutOfRange,
                "label (" + std::to_string(truth) + "," + std::to_string(pred) + ") outside k=" + std::to_string(k_));
  ++counts_[truth * k_ + pred];
  ++total_;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw Error(ErrorKind::ShapeMismatch, "cannot merge confusion matrices of different size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
}

ConfusionMatrix ConfusionMatrix::from_counts(const std::vector<std::vector<std::uint64_t>>& rows) {
  ConfusionMatrix cm(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw Error(ErrorKind::ShapeMismatch, "confusion rows must be square");
    for (std::size_t j = 0; j < rows.size(); ++j) {
      cm.counts_[i * cm.k_ + j] = rows[i][j];
      cm.total_ += rows[i][j];
    }
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorKind::EmptyMatrix, "accuracy of an empty confusion matrix");
  std::uint64_t trace = 0;
  for (std::size_t c = 0; c < cm.k(); ++c) trace += cm.at(c, c);
  return double(trace) / double(cm.total());
}

PrecisionRecall macro_precision_recall(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorKind::EmptyMatrix, "precision/recall of an empty confusion matrix");
  double p = 0.0, r = 0.0;
  for (std::size_t c = 0; c < cm.k(); ++c) {
    const double tp = double(cm.at(c, c));
    if (const auto col = cm.col_sum(c)) p += tp / double(col);
    if (const auto row = cm.row_sum(c)) r += tp / double(row);
  }
  return {p / double(cm.k()), r / double(cm.k())};
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  return out;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

void report_write(const std::vector<TaskReport>& tasks, const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw Error(ErrorKind::IoError, "not a directory: " + dir.string());
  for (const auto& t : tasks) {
    if (t.class_names.size() != t.cm.k())
      throw Error(ErrorKind::ShapeMismatch, "class name count does not match confusion size");
    auto out = open_out(dir / ("confusion_" + t.task + ".csv"));
    for (std::size_t c = 0; c < t.cm.k(); ++c) out << (c ? "," : "") << t.class_names[c];
    out << '\n';
    for (std::size_t i = 0; i < t.cm.k(); ++i) {
      for (std::size_t j = 0; j < t.cm.k(); ++j) out << (j ? "," : "") << t.cm.at(i, j);
      out << '\n';
    }
    if (!out) throw Error(ErrorKind::IoError, "write failed for confusion_" + t.task + ".csv");
  }
  auto out = open_out(dir / "metrics.csv");
  out << "task,accuracy,precision,recall\n";
  for (const auto& t : tasks) {
    const auto pr = macro_precision_recall(t.cm);
    out << t.task << ',' << fixed4(accuracy(t.cm)) << ',' << fixed4(pr.precision) << ',' << fixed4(pr.recall) << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "write failed for metrics.csv");
}

ConfusionMatrix read_confusion_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::MissingHeader, "empty confusion file");
  std::vector<std::vector<std::uint64_t>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::uint64_t> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stoull(cell));
    rows.push_back(std::move(row));
  }
  return ConfusionMatrix::from_counts(rows);
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "task,accuracy,precision,recall")
    throw Error(ErrorKind::MissingHeader, "metrics file lacks its header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string task, a, p, r;
    if (!std::getline(ss, task, ',') || !std::getline(ss, a, ',') || !std::getline(ss, p, ',') || !std::getline(ss, r))
      throw Error(ErrorKind::IoError, "malformed metrics row: " + line);
    rows.push_back({task, std::stod(a), std::stod(p), std::stod(r)});
  }
  return rows;
}

}  // namespace leafstress
