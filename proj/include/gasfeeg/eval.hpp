#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gasfeeg/common.hpp"

namespace gasfeeg {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline ConfusionCounts confusion(std::span<const Label> preds, std::span<const Label> labels,
                                 Label positive = Label::Focal) {
  if (preds.size() != labels.size())
    throw ShapeMismatch("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                        std::to_string(labels.size()) + " labels");
  if (preds.empty()) throw Error("confusion: empty input");
  ConfusionCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == positive, y = labels[i] == positive;
    if (p && y) ++c.tp;
    else if (p) ++c.fp;
    else if (y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

struct ClassMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  std::size_t support = 0;
  // Set when the corresponding denominator was zero; the value is then 0.
  bool precision_undefined = false, recall_undefined = false, f1_undefined = false;

  bool any_undefined() const { return precision_undefined || recall_undefined || f1_undefined; }
};

inline ClassMetrics prf(const ConfusionCounts& c) {
  ClassMetrics m;
  m.support = c.tp + c.fn;
  const auto ratio = [](std::size_t num, std::size_t den, bool& undefined) {
    undefined = den == 0;
    return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.precision = ratio(c.tp, c.tp + c.fp, m.precision_undefined);
  m.recall = ratio(c.tp, c.tp + c.fn, m.recall_undefined);
  const double s = m.precision + m.recall;
  m.f1_undefined = s == 0.0;
  m.f1 = m.f1_undefined ? 0.0 : 2.0 * m.precision * m.recall / s;
  return m;
}

// F1 from already-rounded precision and recall values.
inline double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

/// Unweighted per-class mean. F1 is the mean of per-class F1 values.
inline ClassMetrics macro_average(std::span<const ClassMetrics> per_class) {
  if (per_class.empty()) throw Error("macro_average: no classes");
  ClassMetrics m;
  const auto n = static_cast<double>(per_class.size());
  for (const auto& c : per_class) {
    m.precision += c.precision;
    m.recall += c.recall;
    m.f1 += c.f1;
    m.support += c.support;
    m.precision_undefined |= c.precision_undefined;
    m.recall_undefined |= c.recall_undefined;
    m.f1_undefined |= c.f1_undefined;
  }
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  return m;
}

struct RocPoint {
  double fpr = 0.0, tpr = 0.0;
  double threshold = 0.0;  // predict positive when score >= threshold; +inf at the origin
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// One point per distinct score (descending), anchored at (0,0) and (1,1);
/// AUC by the trapezoidal rule.
inline RocCurve roc_curve(std::span<const double> scores, std::span<const Label> labels,
                          Label positive = Label::Focal) {
  if (scores.size() != labels.size())
    throw ShapeMismatch("roc_curve: " + std::to_string(scores.size()) + " scores vs " +
                        std::to_string(labels.size()) + " labels");
  std::size_t P = 0;
  for (auto l : labels) P += l == positive;
  const std::size_t N = labels.size() - P;
  if (P == 0 || N == 0) throw DegenerateInput("roc_curve needs both classes present");

  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve r;
  r.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double s = scores[idx[i]];
    for (; i < idx.size() && scores[idx[i]] == s; ++i) (labels[idx[i]] == positive ? tp : fp) += 1;
    r.points.push_back({static_cast<double>(fp) / static_cast<double>(N), static_cast<double>(tp) / static_cast<double>(P), s});
  }
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    const auto& a = r.points[i - 1];
    const auto& b = r.points[i];
    r.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return r;
}

struct MetricsReport {
  ConfusionCounts counts;  // positive = Focal
  ClassMetrics focal;
  ClassMetrics normal;
  ClassMetrics average;
  double auc = 0.0;
  std::size_t samples = 0;
};

/// Full report from hard predictions and positive-class scores.
inline MetricsReport evaluate(std::span<const Label> preds, std::span<const double> focal_scores,
                              std::span<const Label> labels) {
  MetricsReport r;
  r.counts = confusion(preds, labels, Label::Focal);
  r.focal = prf(r.counts);
  r.normal = prf(confusion(preds, labels, Label::Normal));
  const ClassMetrics both[] = {r.focal, r.normal};
  r.average = macro_average(both);
  r.auc = roc_curve(focal_scores, labels, Label::Focal).auc;
  r.samples = labels.size();
  return r;
}

namespace detail {

inline double round_to(double v, int digits) {
  const double f = std::pow(10.0, digits);
  return std::round(v * f) / f;
}

inline nlohmann::json metrics_json(const ClassMetrics& m) {
  return {{"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"support", m.support},
          {"undefined", {{"precision", m.precision_undefined}, {"recall", m.recall_undefined}, {"f1", m.f1_undefined}}},
          {"rounded", {{"precision", round_to(m.precision, 2)}, {"recall", round_to(m.recall, 2)}, {"f1", round_to(m.f1, 2)}}}};
}

}  // namespace detail

inline nlohmann::json to_json(const MetricsReport& r) {
  return {{"positive_class", "focal"},
          {"samples", r.samples},
          {"confusion", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}}},
          {"focal", detail::metrics_json(r.focal)},
          {"normal", detail::metrics_json(r.normal)},
          {"average", detail::metrics_json(r.average)},
          {"auc", r.auc}};
}

inline void write_metrics_json(const std::filesystem::path& path, const MetricsReport& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << to_json(r).dump(2) << '\n';
}

/// Rows: Focal, Normal, Average; columns: model, class, precision, recall, f1, auc.
inline std::string metrics_table_csv(const MetricsReport& r, const std::string& model) {
  std::string out = "model,class,precision,recall,f1,auc\n";
  char buf[256];
  const auto row = [&](const char* cls, const ClassMetrics& m, bool with_auc) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.4f,%.4f,%.4f,", model.c_str(), cls, m.precision, m.recall, m.f1);
    out += buf;
    if (with_auc) {
      std::snprintf(buf, sizeof buf, "%.4f", r.auc);
      out += buf;
    }
    out += '\n';
  };
  row("Focal", r.focal, false);
  row("Normal", r.normal, false);
  row("Average", r.average, true);
  return out;
}

inline std::string roc_csv(const RocCurve& c) {
  std::string out = "threshold,fpr,tpr\n";
  char buf[128];
  for (const auto& p : c.points) {
    if (std::isinf(p.threshold))
      std::snprintf(buf, sizeof buf, "inf,%.17g,%.17g\n", p.fpr, p.tpr);
    else
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
    out += buf;
  }
  return out;
}

}  // namespace gasfeeg
