// Copyright 2026 The DACNet Toolkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dacnet/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "dacnet/text.hpp"

namespace dacnet {

using nlohmann::json;

void PredictionSet::validate() const {
  const auto n = static_cast<Eigen::Index>(image_ids.size());
  if (scores.rows() != n || targets.rows() != n) {
    throw Error("prediction set: image ids, scores and targets are not row-aligned");
  }
  if (scores.cols() != static_cast<Eigen::Index>(kNumDiseases) ||
      targets.cols() != static_cast<Eigen::Index>(kNumDiseases)) {
    throw Error("prediction set: expected 14 disease columns");
  }
  if (n > 0 && (!(scores.minCoeff() >= 0.0) || !(scores.maxCoeff() <= 1.0))) {
    throw Error("prediction set: scores must lie in [0, 1]");
  }
  if (n > 0 && targets.maxCoeff() > 1) throw Error("prediction set: targets must be binary");
  if (logits && (logits->rows() != n || logits->cols() != scores.cols())) {
    throw Error("prediction set: logits shape mismatch");
  }
}

std::string_view to_string(ThresholdProvenance p) {
  switch (p) {
    case ThresholdProvenance::kValidation: return "val";
    case ThresholdProvenance::kTest: return "test";
    case ThresholdProvenance::kTrain: return "train";
    case ThresholdProvenance::kGlobal: return "global";
    case ThresholdProvenance::kUnknown: return "unknown";
  }
  return "unknown";
}

ThresholdProvenance threshold_provenance_from_string(std::string_view s) {
  if (s == "val") return ThresholdProvenance::kValidation;
  if (s == "test") return ThresholdProvenance::kTest;
  if (s == "train") return ThresholdProvenance::kTrain;
  if (s == "global") return ThresholdProvenance::kGlobal;
  if (s == "unknown") return ThresholdProvenance::kUnknown;
  throw ParseError("unknown threshold provenance '" + std::string(s) + "'");
}

ThresholdSet ThresholdSet::global(double value) {
  if (!(value >= 0.0 && value <= 1.0)) throw Error("threshold must lie in [0, 1]");
  ThresholdSet s;
  s.t.fill(value);
  s.provenance = ThresholdProvenance::kGlobal;
  return s;
}

std::vector<double> make_threshold_grid(int steps) {
  if (steps < 1) throw Error("threshold grid needs at least one step");
  std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) grid[i] = static_cast<double>(i) / steps;
  return grid;
}

namespace {

void validate_grid(std::span<const double> grid) {
  if (grid.empty()) throw Error("threshold grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) throw Error("threshold grid values must lie in [0, 1]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw Error("threshold grid must be strictly increasing");
  }
}

ThresholdProvenance provenance_of(const std::optional<Split>& split) {
  if (!split) return ThresholdProvenance::kUnknown;
  switch (*split) {
    case Split::kTrain: return ThresholdProvenance::kTrain;
    case Split::kVal: return ThresholdProvenance::kValidation;
    case Split::kTest: return ThresholdProvenance::kTest;
  }
  return ThresholdProvenance::kUnknown;
}

}  // namespace

ThresholdSet tune_thresholds(const PredictionSet& predictions, std::span<const double> grid) {
  validate_grid(grid);
  predictions.validate();
  if (predictions.size() == 0) throw Error("tune_thresholds: empty predictions");
  ThresholdSet out;
  out.provenance = provenance_of(predictions.split);
  for (std::size_t d = 0; d < kNumDiseases; ++d) {
    const auto col = static_cast<Eigen::Index>(d);
    out.t[d] = grid[best_grid_index(predictions.scores.col(col), predictions.targets.col(col), grid)];
  }
  return out;
}

EvalReport evaluate(const PredictionSet& predictions, const ThresholdSet& thresholds,
                    const LossSpec& loss, std::string model_name) {
  if (thresholds.provenance == ThresholdProvenance::kTest) {
    throw LeakageError(
        "refusing to evaluate with thresholds fitted on the test split; fit them on validation");
  }
  predictions.validate();
  if (predictions.size() == 0) throw Error("evaluate: empty predictions");

  EvalReport r;
  r.model_name = std::move(model_name);
  r.split = predictions.split;
  r.num_images = static_cast<std::size_t>(predictions.size());
  r.threshold_provenance = thresholds.provenance;
  for (auto name : kDiseaseNames) r.diseases.emplace_back(name);

  double auc_sum = 0.0;
  int auc_count = 0;
  double f1_sum = 0.0;
  for (std::size_t d = 0; d < kNumDiseases; ++d) {
    const auto col = static_cast<Eigen::Index>(d);
    auto& m = r.per_disease[d];
    const auto scores = predictions.scores.col(col);
    const auto targets = predictions.targets.col(col);
    m.threshold = thresholds.t[d];
    m.positives = static_cast<std::size_t>((targets != 0).count());
    m.auc = auc_roc(scores, targets);
    m.f1 = f1_at_threshold(scores, targets, m.threshold);
    f1_sum += m.f1;
    if (m.auc) {
      auc_sum += *m.auc;
      ++auc_count;
    } else {
      r.warnings.push_back("AUC undefined for " + std::string(kDiseaseNames[d]) +
                           " (single-class targets); excluded from macro-AUC");
    }
  }
  if (auc_count > 0) r.macro_auc = auc_sum / auc_count;
  r.macro_f1 = f1_sum / static_cast<double>(kNumDiseases);

  if (predictions.logits) {
    r.mean_loss = loss_value(loss, *predictions.logits, predictions.targets);
  } else {
    const ScoreArray logits = predictions.scores.unaryExpr(
        [](double p) { return probability_to_logit(p, 1e-12); });
    r.mean_loss = loss_value(loss, logits, predictions.targets);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Predictions table

namespace {

constexpr std::string_view kPredictionsMagic = "# dacnet-predictions";

std::string predictions_header() {
  std::string h = "image_id";
  for (auto name : kDiseaseNames) h += ",score_" + std::string(name);
  for (auto name : kDiseaseNames) h += ",target_" + std::string(name);
  return h;
}

}  // namespace

void write_predictions(const PredictionSet& p, std::ostream& out) {
  p.validate();
  if (p.split) out << kPredictionsMagic << " split=" << to_string(*p.split) << '\n';
  out << predictions_header() << '\n';
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    out << p.image_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index d = 0; d < p.scores.cols(); ++d) out << ',' << format_double(p.scores(i, d));
    for (Eigen::Index d = 0; d < p.targets.cols(); ++d) out << ',' << static_cast<int>(p.targets(i, d));
    out << '\n';
  }
}

void write_predictions(const PredictionSet& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write predictions file " + path.string());
  write_predictions(p, out);
}

PredictionSet read_predictions(std::istream& in, std::string_view source) {
  auto fail = [&](std::size_t line_no, const std::string& what) {
    return ParseError(std::string(source) + ":" + std::to_string(line_no) + ": " + what);
  };
  PredictionSet p;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw fail(1, "empty predictions file");
  ++line_no;
  strip_cr(line);
  if (line.starts_with(kPredictionsMagic)) {
    const auto pos = line.find("split=");
    if (pos != std::string::npos) {
      p.split = split_from_string(trim(std::string_view(line).substr(pos + 6)));
      if (!p.split) throw fail(line_no, "unknown split in predictions preamble");
    }
    if (!std::getline(in, line)) throw fail(line_no + 1, "missing header");
    ++line_no;
    strip_cr(line);
  }
  if (line != predictions_header()) throw fail(line_no, "unexpected predictions header");

  std::vector<std::array<double, kNumDiseases>> scores;
  std::vector<std::array<std::uint8_t, kNumDiseases>> targets;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 1 + 2 * kNumDiseases) {
      throw fail(line_no, "expected " + std::to_string(1 + 2 * kNumDiseases) + " fields");
    }
    p.image_ids.emplace_back(cells[0]);
    std::array<double, kNumDiseases> s{};
    std::array<std::uint8_t, kNumDiseases> t{};
    for (std::size_t d = 0; d < kNumDiseases; ++d) {
      const auto v = parse_double(cells[1 + d]);
      if (!v || !(*v >= 0.0 && *v <= 1.0)) throw fail(line_no, "score out of range");
      s[d] = *v;
      const auto y = trim(cells[1 + kNumDiseases + d]);
      if (y != "0" && y != "1") throw fail(line_no, "target must be 0 or 1");
      t[d] = y == "1" ? 1 : 0;
    }
    scores.push_back(s);
    targets.push_back(t);
  }
  const auto n = static_cast<Eigen::Index>(scores.size());
  p.scores.resize(n, kNumDiseases);
  p.targets.resize(n, kNumDiseases);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < kNumDiseases; ++d) {
      p.scores(i, static_cast<Eigen::Index>(d)) = scores[static_cast<std::size_t>(i)][d];
      p.targets(i, static_cast<Eigen::Index>(d)) = targets[static_cast<std::size_t>(i)][d];
    }
  }
  return p;
}

PredictionSet read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open predictions file " + path.string());
  return read_predictions(in, path.string());
}

// ---------------------------------------------------------------------------
// Threshold files

void write_thresholds(const ThresholdSet& t, const std::filesystem::path& path,
                      std::span<const double> grid) {
  json doc;
  doc["format"] = "dacnet-thresholds/v1";
  doc["fitted_on"] = std::string(to_string(t.provenance));
  json values = json::object();
  for (std::size_t d = 0; d < kNumDiseases; ++d) values[std::string(kDiseaseNames[d])] = t.t[d];
  doc["thresholds"] = values;
  if (!grid.empty()) {
    doc["grid"] = {{"min", grid.front()}, {"max", grid.back()}, {"points", grid.size()}};
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write thresholds file " + path.string());
  out << doc.dump(2) << '\n';
}

ThresholdSet read_thresholds(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open thresholds file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "dacnet-thresholds/v1") {
    throw ParseError(path.string() + ": not a dacnet thresholds file");
  }
  ThresholdSet t;
  t.provenance = threshold_provenance_from_string(doc.value("fitted_on", "unknown"));
  const auto& values = doc.at("thresholds");
  for (std::size_t d = 0; d < kNumDiseases; ++d) {
    const std::string name(kDiseaseNames[d]);
    if (!values.contains(name)) throw ParseError(path.string() + ": missing threshold for " + name);
    const double v = values.at(name).get<double>();
    if (!(v >= 0.0 && v <= 1.0)) throw ParseError(path.string() + ": threshold out of [0, 1] for " + name);
    t.t[d] = v;
  }
  if (values.size() != kNumDiseases) throw ParseError(path.string() + ": unexpected disease names");
  return t;
}

ThresholdSet thresholds_from_argument(const std::string& arg) {
  if (const auto v = parse_double(arg)) return ThresholdSet::global(*v);
  return read_thresholds(arg);
}

// ---------------------------------------------------------------------------
// Reports

std::string report_to_json(const EvalReport& r) {
  json doc;
  doc["format"] = "dacnet-report/v1";
  doc["model"] = r.model_name;
  doc["split"] = r.split ? json(std::string(to_string(*r.split))) : json(nullptr);
  doc["num_images"] = r.num_images;
  doc["loss"] = r.mean_loss;
  doc["macro_auc"] = r.macro_auc ? json(*r.macro_auc) : json(nullptr);
  doc["macro_f1"] = r.macro_f1;
  doc["thresholds_fitted_on"] = std::string(to_string(r.threshold_provenance));
  json rows = json::array();
  for (std::size_t d = 0; d < kNumDiseases; ++d) {
    const auto& m = r.per_disease[d];
    rows.push_back({{"disease", r.diseases.at(d)},
                    {"auc", m.auc ? json(*m.auc) : json(nullptr)},
                    {"f1", m.f1},
                    {"threshold", m.threshold},
                    {"positives", m.positives}});
  }
  doc["per_disease"] = rows;
  doc["warnings"] = r.warnings;
  return doc.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  if (doc.value("format", "") != "dacnet-report/v1") throw ParseError("not a dacnet report");
  EvalReport r;
  r.model_name = doc.value("model", "");
  if (doc.contains("split") && !doc["split"].is_null()) {
    r.split = split_from_string(doc["split"].get<std::string>());
  }
  r.num_images = doc.value("num_images", std::size_t{0});
  r.mean_loss = doc.value("loss", 0.0);
  if (!doc["macro_auc"].is_null()) r.macro_auc = doc["macro_auc"].get<double>();
  r.macro_f1 = doc.value("macro_f1", 0.0);
  r.threshold_provenance = threshold_provenance_from_string(doc.value("thresholds_fitted_on", "unknown"));
  const auto& rows = doc.at("per_disease");
  if (rows.size() != kNumDiseases) throw ParseError("report: expected 14 disease rows");
  for (std::size_t d = 0; d < kNumDiseases; ++d) {
    const auto& row = rows[d];
    r.diseases.push_back(row.at("disease").get<std::string>());
    auto& m = r.per_disease[d];
    if (!row["auc"].is_null()) m.auc = row["auc"].get<double>();
    m.f1 = row.value("f1", 0.0);
    m.threshold = row.value("threshold", 0.5);
    m.positives = row.value("positives", std::size_t{0});
  }
  if (doc.contains("warnings")) r.warnings = doc["warnings"].get<std::vector<std::string>>();
  return r;
}

namespace {

std::string fixed(std::optional<double> v, int precision = 3) {
  if (!v) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << *v;
  return os.str();
}

}  // namespace

std::string report_to_text(const EvalReport& r) {
  std::ostringstream os;
  os << "model: " << (r.model_name.empty() ? "(unnamed)" : r.model_name)
     << "   split: " << (r.split ? std::string(to_string(*r.split)) : "?")
     << "   images: " << r.num_images
     << "   thresholds: " << to_string(r.threshold_provenance) << '\n';
  os << std::left << std::setw(20) << "Disease" << std::right << std::setw(8) << "AUC"
     << std::setw(8) << "F1" << std::setw(11) << "Threshold" << std::setw(11) << "Positives"
     << '\n';
  for (std::size_t d = 0; d < kNumDiseases; ++d) {
    const auto& m = r.per_disease[d];
    os << std::left << std::setw(20) << display_name(DiseaseLabel::from_index(d)) << std::right
       << std::setw(8) << fixed(m.auc) << std::setw(8) << fixed(m.f1) << std::setw(11)
       << fixed(m.threshold, 2) << std::setw(11) << m.positives << '\n';
  }
  os << '\n'
     << std::left << std::setw(20) << "Loss" << std::right << std::setw(8) << fixed(r.mean_loss, 4) << '\n'
     << std::left << std::setw(20) << "AUC" << std::right << std::setw(8) << fixed(r.macro_auc, 4) << '\n'
     << std::left << std::setw(20) << "F1" << std::right << std::setw(8) << fixed(r.macro_f1, 4) << '\n';
  for (const auto& w : r.warnings) os << "warning: " << w << '\n';
  return os.str();
}

BaselineColumn read_baseline(std::istream& in, std::string name) {
  BaselineColumn col;
  col.name = std::move(name);
  std::array<bool, kNumDiseases> seen{};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    const auto content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const auto cells = split(content, ',');
    if (cells.size() != 2) throw ParseError("baseline:" + std::to_string(line_no) + ": expected disease,auc");
    if (trim(cells[0]) == "disease") continue;
    const auto d = DiseaseLabel::parse(trim(cells[0]));
    const auto v = parse_double(cells[1]);
    if (!v) throw ParseError("baseline:" + std::to_string(line_no) + ": bad AUC value");
    col.auc[d.index()] = *v;
    seen[d.index()] = true;
  }
  for (std::size_t d = 0; d < kNumDiseases; ++d) {
    if (!seen[d]) throw Error("baseline column lacks " + std::string(kDiseaseNames[d]));
  }
  return col;
}

BaselineColumn read_baseline(const std::filesystem::path& path, std::string name) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open baseline file " + path.string());
  return read_baseline(in, std::move(name));
}

ComparisonTable render_comparison(std::span<const EvalReport> reports,
                                  const std::optional<BaselineColumn>& baseline) {
  ComparisonTable table;
  std::vector<std::array<std::optional<double>, kNumDiseases>> columns;
  if (baseline) {
    table.columns.push_back(baseline->name);
    columns.push_back(baseline->auc);
  }
  for (const auto& r : reports) {
    if (r.diseases.size() != kNumDiseases) throw Error("report does not cover the 14 diseases");
    for (std::size_t d = 0; d < kNumDiseases; ++d) {
      if (r.diseases[d] != kDiseaseNames[d]) {
        throw Error("report '" + r.model_name + "' uses a different disease ordering (" +
                    r.diseases[d] + " at position " + std::to_string(d) + ")");
      }
    }
    table.columns.push_back(r.model_name.empty() ? "model" : r.model_name);
    std::array<std::optional<double>, kNumDiseases> col{};
    for (std::size_t d = 0; d < kNumDiseases; ++d) col[d] = r.per_disease[d].auc;
    columns.push_back(col);
  }
  if (columns.empty()) throw Error("render_comparison: nothing to compare");

  const bool mark = columns.size() >= 2;
  for (std::size_t d = 0; d < kNumDiseases; ++d) {
    table.row_names.push_back(display_name(DiseaseLabel::from_index(d)));
    std::vector<std::optional<double>> row;
    std::optional<double> best;
    for (const auto& col : columns) {
      row.push_back(col[d]);
      if (col[d] && (!best || *col[d] > *best)) best = col[d];
    }
    std::vector<bool> is_max(row.size(), false);
    if (mark && best) {
      for (std::size_t c = 0; c < row.size(); ++c) is_max[c] = row[c] && *row[c] == *best;
    }
    table.values.push_back(std::move(row));
    table.is_max.push_back(std::move(is_max));
  }
  return table;
}

std::string comparison_to_text(const ComparisonTable& t) {
  std::size_t width = 10;
  for (const auto& c : t.columns) width = std::max(width, c.size() + 2);
  std::ostringstream os;
  os << std::left << std::setw(20) << "Pathology";
  for (const auto& c : t.columns) os << std::right << std::setw(static_cast<int>(width)) << c;
  os << '\n';
  for (std::size_t r = 0; r < t.row_names.size(); ++r) {
    os << std::left << std::setw(20) << t.row_names[r];
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      std::string cell = fixed(t.values[r][c]);
      if (t.is_max[r][c]) cell = "*" + cell;
      os << std::right << std::setw(static_cast<int>(width)) << cell;
    }
    os << '\n';
  }
  if (t.columns.size() >= 2) os << "(* = best in row)\n";
  return os.str();
}

std::string comparison_to_csv(const ComparisonTable& t) {
  std::ostringstream os;
  os << "pathology";
  for (const auto& c : t.columns) os << ',' << c << ',' << c << "_is_max";
  os << '\n';
  for (std::size_t r = 0; r < t.row_names.size(); ++r) {
    os << t.row_names[r];
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      os << ',' << (t.values[r][c] ? format_double(*t.values[r][c]) : "") << ','
         << (t.is_max[r][c] ? 1 : 0);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace dacnet
