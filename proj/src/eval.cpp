#include "musgae/eval.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "musgae/errors.h"

namespace musgae {

int64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), int64_t{0}); }

int64_t ConfusionMatrix::trace() const {
  int64_t t = 0;
  for (int i = 0; i < classes; ++i) t += at(i, i);
  return t;
}

ConfusionMatrix confusion(std::span<const int> pred, std::span<const int> truth, int classes,
                          std::vector<std::string> labels) {
  if (pred.size() != truth.size()) throw std::invalid_argument("confusion: length mismatch");
  if (classes < 1) throw std::invalid_argument("confusion: need at least one class");
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.assign(static_cast<size_t>(classes * classes), 0);
  if (labels.empty()) {
    for (int c = 0; c < classes; ++c) labels.push_back(std::to_string(c));
  }
  if (static_cast<int>(labels.size()) != classes) throw std::invalid_argument("confusion: label names mismatch");
  cm.labels = std::move(labels);
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= classes || truth[i] < 0 || truth[i] >= classes) {
      throw std::invalid_argument("confusion: label out of range");
    }
    ++cm.counts[static_cast<size_t>(truth[i] * classes + pred[i])];
  }
  return cm;
}

ConfusionMatrix confusion(std::span<const int> pred, std::span<const int> truth, TransformType type) {
  const int c = class_count(type);
  std::vector<std::string> names;
  for (int i = 0; i < c; ++i) names.push_back(class_name(type, i));
  return confusion(pred, truth, c, std::move(names));
}

double misclassification(const ConfusionMatrix& cm) {
  const int64_t n = cm.total();
  if (n == 0) return 0.0;
  return 100.0 * (1.0 - static_cast<double>(cm.trace()) / static_cast<double>(n));
}

std::map<int, int64_t> resultant_interval_summary(const ConfusionMatrix& cm) {
  std::map<int, int64_t> hist;
  for (int t = 0; t < cm.classes; ++t) {
    for (int p = 0; p < cm.classes; ++p) {
      if (cm.at(t, p) != 0) hist[std::abs(p - t)] += cm.at(t, p);
    }
  }
  return hist;
}

double random_baseline(int classes) {
  if (classes < 1) throw std::invalid_argument("random_baseline: need at least one class");
  return 100.0 * (1.0 - 1.0 / static_cast<double>(classes));
}

SymmetricEigen jacobi_eigen(const MatrixD& sym, int max_sweeps) {
  const Eigen::Index d = sym.rows();
  if (sym.cols() != d) throw std::invalid_argument("jacobi_eigen: matrix must be square");
  MatrixD a = 0.5 * (sym + sym.transpose());
  MatrixD v = MatrixD::Identity(d, d);  // columns are eigenvectors
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0;
    for (Eigen::Index p = 0; p < d; ++p) {
      for (Eigen::Index q = p + 1; q < d; ++q) off += a(p, q) * a(p, q);
    }
    if (std::sqrt(off) <= 1e-15 * scale) break;
    for (Eigen::Index p = 0; p < d; ++p) {
      for (Eigen::Index q = p + 1; q < d; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        // Rotation angle that zeroes a(p, q) (Golub & Van Loan 8.4).
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (Eigen::Index k = 0; k < d; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < d; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < d; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
  SymmetricEigen out;
  out.vectors.resize(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    const Eigen::Index src = order[static_cast<size_t>(r)];
    out.values.push_back(a(src, src));
    out.vectors.row(r) = v.col(src).transpose();
  }
  return out;
}

PcaResult pca(const MatrixD& data, int k) {
  const Eigen::Index n = data.rows(), d = data.cols();
  if (n < 2) throw std::invalid_argument("pca: need at least two samples");
  if (k < 1 || k > d) throw std::invalid_argument("pca: component count must lie in [1, d]");
  PcaResult r;
  r.mean = data.colwise().mean();
  const MatrixD centered = data.rowwise() - r.mean.row(0);
  const MatrixD cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  const SymmetricEigen eig = jacobi_eigen(cov);
  r.components = eig.vectors.topRows(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < d; ++j) {
      if (std::abs(r.components(c, j)) > std::abs(r.components(c, arg))) arg = j;
    }
    if (r.components(c, arg) < 0) r.components.row(c) *= -1.0;
    r.variances.push_back(std::max(0.0, eig.values[static_cast<size_t>(c)]));
  }
  r.projections = centered * r.components.transpose();
  return r;
}

PcaResult pca(const Matrix& data, int k) { return pca(MatrixD(data.cast<double>()), k); }

void EvalReport::set(const std::string& metric, const std::string& model, const std::string& size,
                     TransformType type, double value) {
  auto it = std::find_if(rows.begin(), rows.end(), [&](const ReportRow& r) {
    return r.metric == metric && r.model == model && r.size == size;
  });
  if (it == rows.end()) {
    rows.push_back({metric, model, size, {}});
    it = rows.end() - 1;
  }
  it->values[static_cast<size_t>(type)] = value;
}

void EvalReport::add_random_baseline() {
  for (TransformType t : kAllTransforms) set("misclassification", "Random", "", t, random_baseline(class_count(t)));
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

constexpr const char* kCsvHeader = "metric,model,size,TransC,TransD,Tempo,Retro";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string pad(const std::string& s, size_t width, bool left = true) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

std::string metric_title(const std::string& metric) {
  if (metric == "misclassification") return "Mis-classification rate (%)";
  if (metric == "cross_entropy") return "Reconstruction cross-entropy (per unit)";
  return metric;
}

}  // namespace

std::string emit_report(const EvalReport& report, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::Csv) {
    out << kCsvHeader << '\n';
    for (const auto& r : report.rows) {
      out << r.metric << ',' << r.model << ',' << r.size;
      for (const auto& v : r.values) out << ',' << (v ? format_double(*v) : "");
      out << '\n';
    }
    return out.str();
  }
  std::vector<std::string> metrics;
  for (const auto& r : report.rows) {
    if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) metrics.push_back(r.metric);
  }
  size_t model_w = 10, size_w = 10;
  for (const auto& r : report.rows) {
    model_w = std::max(model_w, r.model.size() + 2);
    size_w = std::max(size_w, r.size.size() + 2);
  }
  for (const auto& metric : metrics) {
    const int decimals = metric == "cross_entropy" ? 4 : 2;
    out << metric_title(metric) << '\n';
    out << pad("model", model_w) << pad("size", size_w);
    for (TransformType t : kAllTransforms) out << pad(std::string(transform_name(t)), 10, false);
    out << '\n';
    for (const auto& r : report.rows) {
      if (r.metric != metric) continue;
      out << pad(r.model, model_w) << pad(r.size, size_w);
      for (const auto& v : r.values) out << pad(v ? fixed(*v, decimals) : "-", 10, false);
      out << '\n';
    }
    out << '\n';
  }
  for (const auto& [type, cm] : report.confusions) {
    out << "Confusion matrix " << transform_name(type) << " (rows: target, columns: prediction)\n";
    size_t w = 5;
    for (const auto& l : cm.labels) w = std::max(w, l.size() + 1);
    for (int64_t c : cm.counts) w = std::max(w, std::to_string(c).size() + 1);
    out << pad("", w);
    for (const auto& l : cm.labels) out << pad(l, w, false);
    out << '\n';
    for (int t = 0; t < cm.classes; ++t) {
      out << pad(cm.labels[static_cast<size_t>(t)], w);
      for (int p = 0; p < cm.classes; ++p) out << pad(std::to_string(cm.at(t, p)), w, false);
      out << '\n';
    }
    out << "misclassification " << fixed(misclassification(cm), 2) << "%\n";
    out << "|pred - target| histogram:";
    for (const auto& [dist, count] : resultant_interval_summary(cm)) out << ' ' << dist << ':' << count;
    out << "\n\n";
  }
  return out.str();
}

EvalReport parse_report_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw DataError("report CSV: missing or unexpected header");
  EvalReport rep;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 7) throw DataError("report CSV: line " + std::to_string(lineno) + " needs 7 fields");
    ReportRow r{cells[0], cells[1], cells[2], {}};
    for (size_t i = 0; i < 4; ++i) {
      const std::string& c = cells[3 + i];
      if (c.empty()) continue;
      double v = 0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size()) {
        throw DataError("report CSV: bad number '" + c + "' on line " + std::to_string(lineno));
      }
      r.values[i] = v;
    }
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "target\\pred";
  for (const auto& l : cm.labels) out << ',' << l;
  out << '\n';
  for (int t = 0; t < cm.classes; ++t) {
    out << cm.labels[static_cast<size_t>(t)];
    for (int p = 0; p < cm.classes; ++p) out << ',' << cm.at(t, p);
    out << '\n';
  }
  return out.str();
}

namespace {

const std::string& name_of(std::span<const std::string> names, int label, std::string& scratch) {
  if (label >= 0 && static_cast<size_t>(label) < names.size()) return names[static_cast<size_t>(label)];
  scratch = std::to_string(label);
  return scratch;
}

}  // namespace

std::string pca_projections_csv(const PcaResult& r, std::span<const int> labels,
                                std::span<const std::string> class_names) {
  if (static_cast<Eigen::Index>(labels.size()) != r.projections.rows()) {
    throw std::invalid_argument("pca_projections_csv: label count mismatch");
  }
  std::ostringstream out;
  std::string scratch;
  out << "class";
  for (Eigen::Index c = 0; c < r.projections.cols(); ++c) out << ",pc" << c + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < r.projections.rows(); ++i) {
    out << name_of(class_names, labels[static_cast<size_t>(i)], scratch);
    for (Eigen::Index c = 0; c < r.projections.cols(); ++c) out << ',' << format_double(r.projections(i, c));
    out << '\n';
  }
  return out.str();
}

std::string pca_centroids_csv(const PcaResult& r, std::span<const int> labels,
                              std::span<const std::string> class_names) {
  if (static_cast<Eigen::Index>(labels.size()) != r.projections.rows()) {
    throw std::invalid_argument("pca_centroids_csv: label count mismatch");
  }
  std::map<int, std::pair<int64_t, MatrixD>> acc;
  for (Eigen::Index i = 0; i < r.projections.rows(); ++i) {
    auto& [count, sum] = acc[labels[static_cast<size_t>(i)]];
    if (count == 0) sum = MatrixD::Zero(1, r.projections.cols());
    ++count;
    sum += r.projections.row(i);
  }
  std::ostringstream out;
  std::string scratch;
  out << "class,count";
  for (Eigen::Index c = 0; c < r.projections.cols(); ++c) out << ",pc" << c + 1;
  out << '\n';
  for (const auto& [label, entry] : acc) {
    out << name_of(class_names, label, scratch) << ',' << entry.first;
    for (Eigen::Index c = 0; c < r.projections.cols(); ++c) {
      out << ',' << format_double(entry.second(0, c) / static_cast<double>(entry.first));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace musgae
