#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "s2st/finetune.hpp"
#include "s2st/util.hpp"

namespace s2st::finetune {

namespace {

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void TrainingCurve::record_epoch(int epoch, double wer) {
  if (epoch <= 0) throw CurveError("epoch must be positive, got " + std::to_string(epoch));
  if (!points_.empty() && epoch <= points_.back().epoch) {
    throw CurveError("epoch " + std::to_string(epoch) + " recorded after epoch " +
                     std::to_string(points_.back().epoch));
  }
  if (std::isnan(wer) || wer < 0) throw CurveError("WER must be >= 0, got " + exact(wer));
  points_.push_back({epoch, wer});
}

std::string curve_to_csv(const TrainingCurve& curve) {
  std::string out = "epoch,wer\n";
  for (const auto& p : curve.points()) out += std::to_string(p.epoch) + "," + exact(p.wer) + "\n";
  return out;
}

TrainingCurve curve_from_csv(std::string_view csv, std::string config_digest) {
  TrainingCurve curve(std::move(config_digest));
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != "epoch,wer") throw CurveError("curve table must start with the header 'epoch,wer'");
      continue;
    }
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw CurveError("line " + std::to_string(lineno) + ": expected 'epoch,wer'");
    try {
      std::size_t used = 0;
      int epoch = std::stoi(line.substr(0, comma), &used);
      if (used != comma) throw std::invalid_argument("epoch");
      std::string rate = line.substr(comma + 1);
      double wer = std::stod(rate, &used);
      if (used != rate.size()) throw std::invalid_argument("wer");
      curve.record_epoch(epoch, wer);
    } catch (const CurveError&) {
      throw;
    } catch (const std::exception&) {
      throw CurveError("line " + std::to_string(lineno) + ": cannot parse '" + line + "'");
    }
  }
  if (lineno == 0) throw CurveError("curve table is empty");
  return curve;
}

std::string curve_to_svg(const TrainingCurve& curve) {
  constexpr double W = 640, H = 400, left = 60, right = 20, top = 30, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  const auto& pts = curve.points();

  int max_epoch = 1;
  double max_wer = 0;
  for (const auto& p : pts) {
    max_epoch = std::max(max_epoch, p.epoch);
    if (std::isfinite(p.wer)) max_wer = std::max(max_wer, p.wer);
  }
  max_wer = max_wer > 0 ? max_wer * 1.1 : 1.0;
  auto x = [&](double epoch) { return left + pw * epoch / max_epoch; };
  auto y = [&](double wer) { return top + ph * (1.0 - std::min(wer, max_wer) / max_wer); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << " " << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
       "WER (Word error rate)</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double v = max_wer * i / 4;
    s << "<text x=\"" << left - 6 << "\" y=\"" << fixed(y(v) + 4, 1)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fixed(v, 2) << "</text>\n";
    int e = static_cast<int>(std::lround(max_epoch * i / 4.0));
    s << "<text x=\"" << fixed(x(e), 1) << "\" y=\"" << top + ph + 16
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << e << "</text>\n";
  }
  s << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">Epoch</text>\n";
  s << "<text x=\"15\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 15 " << top + ph / 2
    << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">WER</text>\n";
  if (!pts.empty()) {
    s << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) s << ' ';
      s << fixed(x(pts[i].epoch), 2) << ',' << fixed(y(pts[i].wer), 2);
    }
    s << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

CurveFiles export_curve(const TrainingCurve& curve, const std::filesystem::path& stem) {
  CurveFiles files{stem, stem, stem};
  files.csv += ".csv";
  files.svg += ".svg";
  files.json += ".json";
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  atomic_write_file(files.csv, curve_to_csv(curve));
  atomic_write_file(files.svg, curve_to_svg(curve));
  nlohmann::ordered_json j;
  j["config_digest"] = curve.config_digest();
  j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : curve.points()) {
    // JSON has no infinity; the CSV stays authoritative for the values.
    j["points"].push_back({{"epoch", p.epoch}, {"wer", std::isfinite(p.wer) ? nlohmann::ordered_json(p.wer) : nullptr}});
  }
  atomic_write_file(files.json, j.dump(2) + "\n");
  return files;
}

TrainingCurve import_curve(const std::filesystem::path& stem) {
  auto csv = stem;
  csv += ".csv";
  auto json = stem;
  json += ".json";
  std::string digest;
  if (std::filesystem::exists(json)) {
    try {
      digest = nlohmann::json::parse(read_file_text(json)).value("config_digest", std::string());
    } catch (const nlohmann::json::exception& e) {
      throw CurveError(json.string() + ": " + e.what());
    }
  }
  return curve_from_csv(read_file_text(csv), std::move(digest));
}

}  // namespace s2st::finetune
