#pragma once

#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "redcheck/oracle.hpp"

namespace redcheck {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr const char* kSoundIncomplete =
    "program has an init: the passes were checked separately, so HOLDS is sound but FAILS may be spurious";

struct OracleCheck {
  std::optional<Witness> witness;
  bool exhausted = false;
  std::size_t cases = 0;
  bool agrees = true;

  friend bool operator==(const OracleCheck& a, const OracleCheck& b) {
    return a.witness == b.witness && a.exhausted == b.exhausted && a.cases == b.cases && a.agrees == b.agrees;
  }
};

struct Report {
  std::string command;
  std::vector<std::string> inputs;
  Verdict verdict;
  std::optional<OracleCheck> oracle;
  std::map<std::string, double> timings;  // milliseconds
  std::string version = kVersion;

  friend bool operator==(const Report& a, const Report& b) {
    return a.command == b.command && a.inputs == b.inputs && a.verdict == b.verdict && a.oracle == b.oracle &&
           a.timings == b.timings && a.version == b.version;
  }
};

using Json = nlohmann::ordered_json;

inline Json outcome_json(const std::optional<std::vector<Value>>& o) {
  if (!o) return nullptr;
  if (o->size() == 1) return o->front();
  return *o;
}

inline std::optional<std::vector<Value>> outcome_from(const Json& j) {
  if (j.is_null()) return std::nullopt;
  if (j.is_array()) return j.get<std::vector<Value>>();
  return std::vector<Value>{j.get<Value>()};
}

inline Json to_json(const Witness& w) {
  Json j;
  j["word"] = w.word;
  if (!w.sigma.empty() || !w.permuted.empty()) {
    j["sigma"] = w.sigma;
    j["permuted"] = w.permuted;
  }
  j["init"] = Json(w.init);
  j["out1"] = outcome_json(w.out1);
  j["out2"] = outcome_json(w.out2);
  return j;
}

inline Witness witness_from(const Json& j) {
  Witness w;
  w.word = j.at("word").get<std::vector<Value>>();
  if (j.contains("sigma")) {
    w.sigma = j.at("sigma").get<std::vector<std::size_t>>();
    w.permuted = j.at("permuted").get<std::vector<Value>>();
  }
  w.init = j.at("init").get<std::map<std::string, Value>>();
  w.out1 = outcome_from(j.at("out1"));
  w.out2 = outcome_from(j.at("out2"));
  return w;
}

inline Json to_json(const Verdict& v) {
  Json j;
  j["property"] = v.property;
  j["answer"] = answer_text(v.answer);
  Json e;
  e["step"] = v.evidence.step;
  e["multilasso"] = v.evidence.multilasso;
  e["scheme"] = v.evidence.scheme;
  e["tuple"] = v.evidence.tuple;
  e["detail"] = v.evidence.detail;
  if (v.evidence.witness) e["witness"] = to_json(*v.evidence.witness);
  j["evidence"] = e;
  j["sound_incomplete"] = v.sound_incomplete;
  if (v.sound_incomplete) j["caveat"] = kSoundIncomplete;
  Json parts = Json::array();
  for (const auto& [name, p] : v.parts) parts.push_back(Json{{"name", name}, {"verdict", to_json(p)}});
  j["parts"] = parts;
  if (!v.explain.empty()) j["explain"] = v.explain;
  return j;
}

inline Answer answer_from(const std::string& s) {
  if (s == "HOLDS") return Answer::holds;
  if (s == "FAILS") return Answer::fails;
  if (s == "UNSUPPORTED") return Answer::unsupported;
  throw std::invalid_argument("unknown answer '" + s + "'");
}

inline Verdict verdict_from(const Json& j) {
  Verdict v;
  v.property = j.at("property").get<std::string>();
  v.answer = answer_from(j.at("answer").get<std::string>());
  const auto& e = j.at("evidence");
  v.evidence.step = e.at("step").get<std::string>();
  v.evidence.multilasso = e.at("multilasso").get<std::string>();
  v.evidence.scheme = e.at("scheme").get<std::string>();
  v.evidence.tuple = e.at("tuple").get<std::string>();
  v.evidence.detail = e.at("detail").get<std::string>();
  if (e.contains("witness")) v.evidence.witness = witness_from(e.at("witness"));
  v.sound_incomplete = j.at("sound_incomplete").get<bool>();
  for (const auto& p : j.at("parts")) v.parts.emplace_back(p.at("name").get<std::string>(), verdict_from(p.at("verdict")));
  if (j.contains("explain")) v.explain = j.at("explain").get<std::vector<std::string>>();
  return v;
}

inline Json to_json(const Report& r) {
  Json j;
  j["tool"] = "redcheck";
  j["version"] = r.version;
  j["command"] = r.command;
  j["inputs"] = r.inputs;
  j["verdict"] = to_json(r.verdict);
  if (r.oracle) {
    Json o;
    o["agrees"] = r.oracle->agrees;
    o["exhausted"] = r.oracle->exhausted;
    o["cases"] = r.oracle->cases;
    o["witness"] = r.oracle->witness ? to_json(*r.oracle->witness) : Json(nullptr);
    j["oracle_crosscheck"] = o;
  }
  j["timings_ms"] = Json(r.timings);
  return j;
}

inline Report report_from(const Json& j) {
  Report r;
  r.version = j.at("version").get<std::string>();
  r.command = j.at("command").get<std::string>();
  r.inputs = j.at("inputs").get<std::vector<std::string>>();
  r.verdict = verdict_from(j.at("verdict"));
  if (j.contains("oracle_crosscheck")) {
    const auto& o = j.at("oracle_crosscheck");
    OracleCheck c;
    c.agrees = o.at("agrees").get<bool>();
    c.exhausted = o.at("exhausted").get<bool>();
    c.cases = o.at("cases").get<std::size_t>();
    if (!o.at("witness").is_null()) c.witness = witness_from(o.at("witness"));
    r.oracle = c;
  }
  r.timings = j.at("timings_ms").get<std::map<std::string, double>>();
  return r;
}

inline std::string report_json(const Report& r) { return to_json(r).dump(2) + "\n"; }

inline Report parse_report(const std::string& text) { return report_from(Json::parse(text)); }

namespace detail {

inline std::string values_text(const std::vector<Value>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return "(" + s + ")";
}

inline std::string outcome_text(const std::optional<std::vector<Value>>& o) {
  if (!o) return "BOTTOM";
  if (o->size() == 1) return std::to_string(o->front());
  return values_text(*o);
}

inline std::string witness_text(const Witness& w) {
  std::string s = "word " + values_text(w.word);
  if (!w.permuted.empty() || !w.sigma.empty()) s += " vs " + values_text(w.permuted);
  if (!w.init.empty()) {
    s += " init";
    for (const auto& [n, v] : w.init) s += " " + n + "=" + std::to_string(v);
  }
  s += ": " + outcome_text(w.out1);
  if (w.out2 || !w.permuted.empty()) s += " vs " + outcome_text(w.out2);
  return s;
}

inline void verdict_text(std::ostream& os, const Verdict& v, const std::string& indent) {
  os << indent << v.property << ": " << answer_text(v.answer) << "\n";
  const auto& e = v.evidence;
  if (!e.step.empty()) os << indent << "  step: " << e.step << "\n";
  if (!e.multilasso.empty()) os << indent << "  multi-lasso: " << e.multilasso << "\n";
  if (!e.scheme.empty()) os << indent << "  scheme: " << e.scheme << "\n";
  if (!e.tuple.empty()) os << indent << "  tuple: " << e.tuple << "\n";
  if (!e.detail.empty()) os << indent << "  " << e.detail << "\n";
  if (e.witness) os << indent << "  witness: " << witness_text(*e.witness) << "\n";
  if (v.sound_incomplete) os << indent << "  note: " << kSoundIncomplete << "\n";
  for (const auto& [name, p] : v.parts) {
    os << indent << "  [" << name << "]\n";
    verdict_text(os, p, indent + "    ");
  }
}

}  // namespace detail

inline std::string report_text(const Report& r) {
  std::ostringstream os;
  for (const auto& line : r.verdict.explain) os << line << "\n";
  detail::verdict_text(os, r.verdict, "");
  if (r.oracle) {
    os << "oracle: ";
    if (r.oracle->witness)
      os << detail::witness_text(*r.oracle->witness);
    else
      os << "no witness in " << r.oracle->cases << " cases" << (r.oracle->exhausted ? " (budget hit)" : "");
    os << (r.oracle->agrees ? "" : " [DISAGREES]") << "\n";
  }
  return os.str();
}

}  // namespace redcheck
