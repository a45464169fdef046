#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "redcheck/redcheck.hpp"

using namespace redcheck;

namespace {

enum Exit { kHolds = 0, kInput = 1, kUnsupported = 2, kFails = 3 };

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_snt(const std::string& path) { return path.size() >= 4 && path.substr(path.size() - 4) == ".snt"; }

ReducerProgram load_program(const std::string& path) { return parse_program(read_file(path)); }

// An SNT file as is, or a single-pass reducer with a linear return translated.
Snt load_snt(const std::string& path) {
  if (is_snt(path)) return parse_snt(read_file(path));
  auto p = load_program(path);
  if (p.has_init()) throw UnsupportedError("multipass", p.name + ": init programs have no single SNT");
  if (p.ret.kind != ReturnExpr::Kind::linear)
    throw UnsupportedError("linear-return", p.name + ": return of '" + p.ret.function + "' is not linear");
  return program_to_snt(p);
}

std::vector<Value> parse_values(const std::string& text) {
  std::vector<Value> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError("not an integer: '" + item + "'");
    }
  }
  return out;
}

Valuation parse_init(const std::string& text) {
  Valuation out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos) throw InputError("expected name=value, got '" + item + "'");
    auto v = parse_values(item.substr(eq + 1));
    if (v.size() != 1) throw InputError("expected name=value, got '" + item + "'");
    out[item.substr(0, eq)] = v.front();
  }
  return out;
}

std::vector<Value> parse_range(const std::string& text) {
  auto dots = text.find("..");
  if (dots == std::string::npos) {
    std::string list = text;
    std::replace(list.begin(), list.end(), '/', ',');
    return parse_values(list);
  }
  auto lo = parse_values(text.substr(0, dots)), hi = parse_values(text.substr(dots + 2));
  if (lo.size() != 1 || hi.size() != 1 || lo[0] > hi[0]) throw InputError("bad range '" + text + "'");
  std::vector<Value> out;
  for (Value v = lo[0]; v <= hi[0]; ++v) out.push_back(v);
  return out;
}

// max_len=N,values=LO..HI,init=LO..HI,max_init=N,max_cases=N (lists as a/b/c)
SearchBounds parse_bounds(const std::string& text, std::size_t jobs) {
  SearchBounds b;
  b.jobs = jobs;
  if (text.empty()) return b;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw InputError("bad bounds entry '" + item + "'");
    std::string key = item.substr(0, eq), val = item.substr(eq + 1);
    auto number = [&] {
      auto v = parse_values(val);
      if (v.size() != 1 || v[0] < 0) throw InputError("bad bounds entry '" + item + "'");
      return static_cast<std::size_t>(v[0]);
    };
    if (key == "max_len")
      b.max_len = number();
    else if (key == "values")
      b.values = parse_range(val);
    else if (key == "init")
      b.init_values = parse_range(val);
    else if (key == "max_init")
      b.max_init = number();
    else if (key == "max_cases")
      b.max_cases = number();
    else
      throw InputError("unknown bounds key '" + key + "'");
  }
  return b;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

int exit_for(const Verdict& v) {
  switch (v.answer) {
    case Answer::holds: return kHolds;
    case Answer::fails: return kFails;
    case Answer::unsupported: return kUnsupported;
  }
  return kInput;
}

struct Common {
  bool json = false;
  bool explain = false;
  bool oracle = false;
  std::size_t jobs = 1;
  std::string bounds;
};

int emit(Report& r, const Common& c) {
  std::cout << (c.json ? report_json(r) : report_text(r));
  if (r.oracle && !r.oracle->agrees) std::cerr << "warning: the oracle disagrees with the verdict\n";
  return exit_for(r.verdict);
}

// Runs the oracle when asked, or to find a witness for the verdict that has one.
void crosscheck(Report& r, const Common& c, bool always, bool witness_means_fails,
                const std::function<OracleResult(const SearchBounds&)>& search) {
  const Answer witnessed = witness_means_fails ? Answer::fails : Answer::holds;
  if (r.verdict.answer == Answer::unsupported) return;
  if (!always && r.verdict.answer != witnessed) return;
  auto t0 = std::chrono::steady_clock::now();
  OracleResult o = search(parse_bounds(c.bounds, c.jobs));
  r.timings["oracle"] = ms_since(t0);
  bool agrees = attach_witness(r.verdict, o, witness_means_fails);
  if (always) r.oracle = OracleCheck{o.witness, o.exhausted, o.cases, agrees};
}

int cmd_check(const std::string& file, const Common& c) {
  Report r;
  r.command = "check";
  r.inputs = {file};
  DecideOptions opt{c.explain, c.jobs};
  auto t0 = std::chrono::steady_clock::now();
  if (is_snt(file)) {
    Snt s = parse_snt(read_file(file));
    r.timings["parse"] = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    r.verdict = check_commutativity(s, opt);
    r.timings["decide"] = ms_since(t0);
    crosscheck(r, c, c.oracle, true, [&](const SearchBounds& b) { return oracle_commutative(s, b); });
  } else {
    ReducerProgram p = load_program(file);
    r.timings["parse"] = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    r.verdict = check_program(p, opt);
    r.timings["decide"] = ms_since(t0);
    crosscheck(r, c, c.oracle, true, [&](const SearchBounds& b) { return oracle_commutative(p, b); });
  }
  return emit(r, c);
}

int cmd_eq(const std::string& a, const std::string& b, const Common& c) {
  Report r;
  r.command = "eq";
  r.inputs = {a, b};
  auto t0 = std::chrono::steady_clock::now();
  try {
    Snt sa = load_snt(a), sb = load_snt(b);
    r.timings["parse"] = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    r.verdict = check_equivalence(sa, sb, DecideOptions{c.explain, c.jobs});
    r.timings["decide"] = ms_since(t0);
    crosscheck(r, c, c.oracle, true, [&](const SearchBounds& bd) { return oracle_equivalent(sa, sb, bd); });
  } catch (const UnsupportedError& e) {
    r.verdict.property = "equivalence";
    r.verdict.answer = Answer::unsupported;
    r.verdict.evidence.step = e.constraint();
    r.verdict.evidence.detail = e.what();
  }
  return emit(r, c);
}

int cmd_nonzero(const std::string& file, const Common& c) {
  Report r;
  r.command = "nonzero";
  r.inputs = {file};
  auto t0 = std::chrono::steady_clock::now();
  try {
    Snt s = load_snt(file);
    r.timings["parse"] = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    r.verdict = check_nonzero(s, DecideOptions{c.explain, c.jobs});
    r.timings["decide"] = ms_since(t0);
    crosscheck(r, c, c.oracle, false, [&](const SearchBounds& b) { return oracle_nonzero(s, b); });
  } catch (const UnsupportedError& e) {
    r.verdict.property = "nonzero";
    r.verdict.answer = Answer::unsupported;
    r.verdict.evidence.step = e.constraint();
    r.verdict.evidence.detail = e.what();
  }
  return emit(r, c);
}

int cmd_run(const std::string& file, const std::string& word, const std::string& init) {
  auto w = parse_values(word);
  auto rho = parse_init(init);
  if (is_snt(file)) {
    Snt s = parse_snt(read_file(file));
    SntValuation v = valuation_from_names(s, rho);
    apply_links(s, v);
    auto o = run(s, w, v);
    std::cout << (o ? std::to_string(*o) : "BOTTOM") << "\n";
  } else {
    auto o = interpret(load_program(file), w, rho);
    std::cout << detail::outcome_text(o) << "\n";
  }
  return 0;
}

int cmd_translate(const std::string& file, const std::string& out) {
  Snt s = load_snt(file);
  std::string text = to_text(s);
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream o(out);
    if (!o) throw InputError("cannot write " + out);
    o << text;
  }
  return 0;
}

int cmd_oracle(const std::string& file, const std::string& other, bool nonzero, const Common& c) {
  SearchBounds b = parse_bounds(c.bounds, c.jobs);
  OracleResult r;
  if (!other.empty()) {
    if (!is_snt(file) && !is_snt(other))
      r = oracle_equivalent(load_program(file), load_program(other), b);
    else
      r = oracle_equivalent(load_snt(file), load_snt(other), b);
  } else if (nonzero) {
    r = oracle_nonzero(load_snt(file), b);
  } else if (is_snt(file)) {
    r = oracle_commutative(parse_snt(read_file(file)), b);
  } else {
    r = oracle_commutative(load_program(file), b);
  }
  if (c.json) {
    Json j;
    j["witness"] = r.witness ? to_json(*r.witness) : Json(nullptr);
    j["exhausted"] = r.exhausted;
    j["cases"] = r.cases;
    std::cout << j.dump(2) << "\n";
  } else if (r.witness) {
    std::cout << "witness: " << detail::witness_text(*r.witness) << "\n";
  } else {
    std::cout << "no witness in " << r.cases << " cases" << (r.exhausted ? " (budget exhausted)" : "") << "\n";
  }
  return r.witness ? kFails : kHolds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"commutativity checker for reducer programs"};
  app.require_subcommand(1);
  Common c;
  auto common = [&](CLI::App* sub, bool decide) {
    sub->add_flag("--json", c.json, "print the report as JSON");
    sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--bounds", c.bounds, "oracle bounds, e.g. max_len=4,values=-2..2,init=-1..1");
    if (decide) {
      sub->add_flag("--explain", c.explain, "dump summaries and abstractions");
      sub->add_flag("--oracle", c.oracle, "cross-check with the bounded oracle");
    }
  };

  std::string file, other, word, init, out;
  bool nonzero = false;

  auto* check = app.add_subcommand("check", "decide commutativity of a reducer (.red) or SNT (.snt)");
  check->add_option("file", file)->required();
  common(check, true);

  auto* eq = app.add_subcommand("eq", "decide equivalence of two machines");
  eq->add_option("a", file)->required();
  eq->add_option("b", other)->required();
  common(eq, true);

  auto* nz = app.add_subcommand("nonzero", "decide whether some run outputs a nonzero value");
  nz->add_option("file", file)->required();
  common(nz, true);

  auto* runc = app.add_subcommand("run", "run a reducer or SNT on one word");
  runc->add_option("file", file)->required();
  runc->add_option("--word", word, "comma separated integers");
  runc->add_option("--init", init, "initial valuation, e.g. x=0,y=1");

  auto* tr = app.add_subcommand("translate", "translate a reducer to an SNT");
  tr->add_option("file", file)->required();
  tr->add_option("-o,--output", out, "output file (default stdout)");

  auto* orc = app.add_subcommand("oracle", "bounded search for a counterexample");
  orc->add_option("file", file)->required();
  orc->add_option("--eq", other, "search for an equivalence counterexample against this file");
  orc->add_flag("--nonzero", nonzero, "search for a nonzero output");
  common(orc, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kInput;
  }

  try {
    if (*check) return cmd_check(file, c);
    if (*eq) return cmd_eq(file, other, c);
    if (*nz) return cmd_nonzero(file, c);
    if (*runc) return cmd_run(file, word, init);
    if (*tr) return cmd_translate(file, out);
    if (*orc) return cmd_oracle(file, other, nonzero, c);
  } catch (const UnsupportedError& e) {
    std::cerr << "unsupported: " << e.what() << "\n";
    return kUnsupported;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  }
  return kInput;
}
