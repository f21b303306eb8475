#include "avsd/pool_io.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

namespace avsd {

using nlohmann::json;

namespace {

// null stands for -inf, which the wire format cannot spell.
std::vector<double> log_array(const json& j, const char* what) {
  if (!j.is_array()) throw RejectedInput(std::string(what) + " must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (x.is_null()) {
      out.push_back(-std::numeric_limits<double>::infinity());
    } else if (x.is_number()) {
      out.push_back(x.get<double>());
    } else {
      throw RejectedInput(std::string(what) + " must hold numbers");
    }
  }
  return out;
}

LogDist ingest(const std::vector<double>& values, const char* what, std::size_t& renormalized) {
  if (values.empty()) throw RejectedInput(std::string(what) + " is empty");
  const Vec v = Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
  for (double x : values) {
    if (std::isnan(x) || x == std::numeric_limits<double>::infinity()) {
      throw RejectedInput(std::string(what) + " holds NaN or +inf");
    }
  }
  const double lse = log_sum_exp(v);
  if (std::abs(lse) > kRenormalizeTolerance) {
    throw RejectedInput(std::string(what) + " is not normalized (log-sum-exp " + std::to_string(lse) + ")");
  }
  if (std::abs(lse) > kNormalizedTolerance) ++renormalized;
  return LogDist::from_log_probs(v);
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

PooledSignal pool_record(const PoolRecord& rec, double epsilon, std::size_t& renormalized) {
  if (rec.view_logps.empty()) throw RejectedInput("view_logps is empty");
  const std::size_t n = rec.student_logp.size();
  for (const auto& v : rec.view_logps) {
    if (v.size() != n) throw RejectedInput("length mismatch between student_logp and view_logps");
  }
  std::size_t local = 0;
  const auto p = ingest(rec.student_logp, "student_logp", local);
  std::vector<LogDist> views;
  for (const auto& v : rec.view_logps) views.push_back(ingest(v, "view_logps", local));
  auto fam = rec.weights ? ViewFamily(std::move(views), *rec.weights) : ViewFamily(std::move(views));
  auto sig = pool(p, fam, epsilon);
  renormalized += local;
  return sig;
}

std::string pool_line(const std::string& line, double epsilon, PoolStats& stats) {
  ++stats.records;
  json out = json::object();
  try {
    const auto j = json::parse(line);
    PoolRecord rec;
    rec.id = j.at("id").get<std::uint64_t>();
    rec.position = j.at("position").get<std::uint64_t>();
    out["id"] = rec.id;
    out["position"] = rec.position;
    rec.student_logp = log_array(j.at("student_logp"), "student_logp");
    const auto& views = j.at("view_logps");
    if (!views.is_array()) throw RejectedInput("view_logps must be an array of arrays");
    for (const auto& v : views) rec.view_logps.push_back(log_array(v, "view_logps"));
    if (j.contains("weights") && !j["weights"].is_null()) rec.weights = j["weights"].get<std::vector<double>>();

    const auto sig = pool_record(rec, epsilon, stats.renormalized);
    out["qstar"] = to_std(sig.qstar.logp());
    out["a_hat"] = to_std(sig.a_hat);
    out["lambda"] = to_std(sig.lambda);
    out["residual"] = to_std(sig.residual);
    out["a_geo"] = to_std(sig.a_geo);
  } catch (const std::exception& e) {
    ++stats.errors;
    // Keep only the identification fields that parsed.
    json err = json::object();
    if (out.contains("id")) err["id"] = out["id"];
    if (out.contains("position")) err["position"] = out["position"];
    err["error"] = e.what();
    out = std::move(err);
  }
  return out.dump();
}

PoolStats pool_stream(std::istream& in, std::ostream& out, double epsilon) {
  PoolStats stats;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out << pool_line(line, epsilon, stats) << '\n';
  }
  return stats;
}

}  // namespace avsd
