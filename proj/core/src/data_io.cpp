#include "sigbench/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>
#include <tuple>

#include "sigbench/util.hpp"

namespace sigbench::io {

std::string_view to_string(Truth t) { return t == Truth::Genuine ? "genuine" : "impostor"; }

std::optional<Truth> parse_truth(std::string_view s) {
  if (s == "genuine") return Truth::Genuine;
  if (s == "impostor") return Truth::Impostor;
  return std::nullopt;
}

int task_number(Task t) { return static_cast<int>(t); }

std::optional<Task> parse_task(std::string_view s) {
  if (s == "1") return Task::Task1;
  if (s == "2") return Task::Task2;
  if (s == "3") return Task::Task3;
  return std::nullopt;
}

std::vector<std::string> validate_comparison(const ComparisonRecord& rec) {
  std::vector<std::string> out;
  if (rec.enrolment_refs.empty()) out.emplace_back("no enrolment references");
  for (const auto& r : rec.enrolment_refs) {
    if (r.empty()) out.emplace_back("empty enrolment reference");
  }
  if (rec.probe_ref.empty()) out.emplace_back("empty probe reference");
  if ((rec.truth == Truth::Genuine) != (rec.forgery_type == ForgeryType::Genuine)) {
    out.emplace_back("truth inconsistent with forgery type");
  }
  return out;
}

bool task_accepts(Task task, const SignatureMeta& meta) {
  switch (task) {
    case Task::Task1:
      return meta.writing_input == WritingInput::Stylus && meta.scenario == Scenario::Office;
    case Task::Task2:
      return meta.writing_input == WritingInput::Finger && meta.scenario == Scenario::Mobile;
    case Task::Task3:
      return true;
  }
  return false;
}

namespace {

std::optional<double> parse_double(std::string_view tok) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> toks;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) toks.push_back(line.substr(i, j - i));
    i = j;
  }
  return toks;
}

std::vector<std::string_view> nonblank_lines(std::string_view content) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = trim(content.substr(start, end - start));
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

}  // namespace

Signature parse_svc_text(std::string_view content) {
  const auto lines = nonblank_lines(content);
  if (lines.empty()) throw ParseError("empty signature file");

  const auto header = tokenize(lines[0]);
  std::size_t n = 0;
  {
    if (header.size() != 1) throw ParseError("malformed sample-count header");
    const auto [ptr, ec] =
        std::from_chars(header[0].data(), header[0].data() + header[0].size(), n);
    if (ec != std::errc{} || ptr != header[0].data() + header[0].size()) {
      throw ParseError("malformed sample-count header");
    }
  }
  if (n < 2) throw ParseError("sample count below 2");
  if (lines.size() - 1 != n) {
    throw ParseError("row count mismatch: header says " + std::to_string(n) + ", found " +
                     std::to_string(lines.size() - 1));
  }

  Signature sig;
  sig.x.reserve(n);
  sig.y.reserve(n);
  sig.pressure.reserve(n);
  sig.timestamp.reserve(n);
  sig.pen_status.reserve(n);

  std::size_t columns = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto toks = tokenize(lines[r + 1]);
    if (toks.size() != 4 && toks.size() != 7) {
      throw ParseError("row " + std::to_string(r + 1) + ": column count " +
                       std::to_string(toks.size()) + " not in {4,7}");
    }
    if (columns == 0) columns = toks.size();
    if (toks.size() != columns) {
      throw ParseError("row " + std::to_string(r + 1) + ": inconsistent column count");
    }
    double v[7];
    for (std::size_t c = 0; c < toks.size(); ++c) {
      const auto d = parse_double(toks[c]);
      if (!d || !std::isfinite(*d)) {
        throw ParseError("row " + std::to_string(r + 1) + ": non-numeric field '" +
                         std::string(toks[c]) + "'");
      }
      v[c] = *d;
    }
    if (v[3] != 0.0 && v[3] != 1.0) {
      throw ParseError("row " + std::to_string(r + 1) + ": pen status must be 0 or 1");
    }
    sig.x.push_back(v[0]);
    sig.y.push_back(v[1]);
    sig.timestamp.push_back(v[2]);
    sig.pen_status.push_back(static_cast<int>(v[3]));
    sig.pressure.push_back(columns == 7 ? v[6] : 0.0);
  }

  auto problems = validate_signature(sig);
  if (!problems.empty()) throw ParseError("invalid signature: " + problems.front());
  return sig;
}

std::string format_svc_text(const Signature& sig, bool with_pressure) {
  std::ostringstream out;
  out << sig.size() << '\n';
  for (std::size_t i = 0; i < sig.size(); ++i) {
    out << format_sig(sig.x[i]) << ' ' << format_sig(sig.y[i]) << ' '
        << format_sig(sig.timestamp[i]) << ' ' << sig.pen_status[i];
    if (with_pressure) out << " 0 0 " << format_sig(sig.pressure[i]);
    out << '\n';
  }
  return out.str();
}

// ---- filename patterns ----------------------------------------------------

namespace {

std::map<std::string, ForgeryType> default_type_codes() {
  return {
      {"g", ForgeryType::Genuine},           {"r", ForgeryType::Random},
      {"bl", ForgeryType::Blind},            {"st", ForgeryType::StaticTrained},
      {"sb", ForgeryType::StaticBlueprint},  {"dt", ForgeryType::DynamicTrained},
      {"db", ForgeryType::DynamicBlueprint}, {"rg", ForgeryType::Regained},
  };
}

std::map<std::string, WritingInput> default_input_codes() {
  return {{"sty", WritingInput::Stylus},
          {"stylus", WritingInput::Stylus},
          {"fin", WritingInput::Finger},
          {"finger", WritingInput::Finger}};
}

std::map<std::string, Scenario> default_scenario_codes() {
  return {{"office", Scenario::Office}, {"mobile", Scenario::Mobile}};
}

struct CompiledTemplate {
  std::regex re;
  std::vector<std::string> fields;
};

CompiledTemplate compile_template(const std::string& tmpl) {
  static const std::set<std::string> known = {"subject", "session", "type", "index",
                                              "input",   "scenario", "forger"};
  std::string re;
  std::vector<std::string> fields;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const char c = tmpl[i];
    if (c == '{') {
      const auto close = tmpl.find('}', i);
      if (close == std::string::npos) {
        throw std::invalid_argument("unterminated field in pattern: " + tmpl);
      }
      std::string name = tmpl.substr(i + 1, close - i - 1);
      if (!known.contains(name)) {
        throw std::invalid_argument("unknown pattern field {" + name + "}");
      }
      if (std::find(fields.begin(), fields.end(), name) != fields.end()) {
        throw std::invalid_argument("repeated pattern field {" + name + "}");
      }
      re += (name == "session" || name == "index") ? "([0-9]+)" : "([A-Za-z0-9]+?)";
      fields.push_back(std::move(name));
      i = close + 1;
      continue;
    }
    if (std::string_view(".^$|()[]*+?\\/").find(c) != std::string_view::npos) re += '\\';
    re += c;
    ++i;
  }
  if (std::find(fields.begin(), fields.end(), "subject") == fields.end()) {
    throw std::invalid_argument("pattern lacks {subject}: " + tmpl);
  }
  return {std::regex(re), std::move(fields)};
}

}  // namespace

FilenamePattern FilenamePattern::from_template(std::string tmpl) {
  FilenamePattern p;
  p.templates.push_back(std::move(tmpl));
  p.type_codes = default_type_codes();
  p.input_codes = default_input_codes();
  p.scenario_codes = default_scenario_codes();
  return p;
}

FilenamePattern FilenamePattern::preset(std::string_view name) {
  if (name == "synth") {
    FilenamePattern p = from_template("u{subject}_{input}_{type}_s{session}_{index}.txt");
    p.templates.push_back("u{subject}_{input}_{type}_s{session}_{index}_f{forger}.txt");
    p.device_id = "synthetic";
    return p;
  }
  // The two public databases below are laid out as u<subject>_<type>_<index>
  // with g/s type codes; skilled files carry no level, so they are tagged
  // as the dynamic-trained level. Verify against the actual downloads.
  if (name == "deepsigndb") {
    FilenamePattern p = from_template("u{subject}_{type}_{input}_{index}.txt");
    p.templates.push_back("u{subject}_{type}_{index}.txt");
    p.type_codes = {{"g", ForgeryType::Genuine}, {"s", ForgeryType::DynamicTrained}};
    p.device_id = "deepsigndb";
    return p;
  }
  if (name == "svc2021") {
    FilenamePattern p = from_template("u{subject}_{type}_s{session}_{index}.txt");
    p.type_codes = {{"g", ForgeryType::Genuine}, {"s", ForgeryType::DynamicTrained}};
    p.device_id = "svc2021";
    return p;
  }
  throw std::invalid_argument("unknown layout preset: " + std::string(name));
}

std::optional<FilenamePattern::Match> FilenamePattern::match(std::string_view filename) const {
  const std::string fname(filename);
  for (const auto& tmpl : templates) {
    const auto compiled = compile_template(tmpl);
    std::smatch m;
    if (!std::regex_match(fname, m, compiled.re)) continue;

    Match out;
    out.meta.writing_input = default_input;
    out.meta.device_id = device_id;
    std::optional<Scenario> scenario = default_scenario;
    std::optional<std::string> forger;
    bool ok = true;
    for (std::size_t f = 0; f < compiled.fields.size() && ok; ++f) {
      const std::string& field = compiled.fields[f];
      const std::string value = m[static_cast<int>(f) + 1].str();
      if (field == "subject") {
        out.meta.subject_id = value;
      } else if (field == "session") {
        out.meta.session = std::stoi(value);
      } else if (field == "index") {
        out.index = std::stoi(value);
      } else if (field == "type") {
        auto it = type_codes.find(value);
        if (it == type_codes.end()) ok = false;
        else out.meta.forgery_type = it->second;
      } else if (field == "input") {
        auto it = input_codes.find(value);
        if (it == input_codes.end()) ok = false;
        else out.meta.writing_input = it->second;
      } else if (field == "scenario") {
        auto it = scenario_codes.find(value);
        if (it == scenario_codes.end()) ok = false;
        else scenario = it->second;
      } else if (field == "forger") {
        forger = value;
      }
    }
    if (!ok) continue;
    out.meta.scenario = scenario.value_or(out.meta.writing_input == WritingInput::Stylus
                                              ? Scenario::Office
                                              : Scenario::Mobile);
    if (is_presentation_attack(out.meta.forgery_type)) {
      out.meta.forger_id = forger.value_or(unknown_forger);
    }
    return out;
  }
  return std::nullopt;
}

const LoadedSignature* Dataset::find(std::string_view id) const {
  auto it = std::lower_bound(signatures.begin(), signatures.end(), id,
                             [](const LoadedSignature& s, std::string_view v) { return s.id < v; });
  if (it == signatures.end() || it->id != id) return nullptr;
  return &*it;
}

Dataset load_dataset(const std::filesystem::path& root, const FilenamePattern& layout) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw std::runtime_error("dataset root is not a readable directory: " + root.string());
  }

  std::vector<std::pair<std::string, fs::path>> files;
  for (auto it = fs::recursive_directory_iterator(root, ec); !ec && it != fs::end(it);
       it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    files.emplace_back(fs::relative(it->path(), root).generic_string(), it->path());
  }
  if (ec) throw std::runtime_error("cannot traverse " + root.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());

  Dataset ds;
  using Key = std::tuple<std::string, int, ForgeryType, int, WritingInput>;
  std::map<Key, std::string> seen;
  for (const auto& [id, path] : files) {
    const auto match = layout.match(path.filename().string());
    if (!match) {
      ds.skipped.push_back(id);
      continue;
    }
    const Key key{match->meta.subject_id, match->meta.session, match->meta.forgery_type,
                  match->index, match->meta.writing_input};
    if (auto [it, inserted] = seen.emplace(key, id); !inserted) {
      throw std::runtime_error("duplicate sample: " + it->second + " and " + id);
    }

    Signature sig;
    try {
      sig = parse_svc_text(read_file(path));
    } catch (const ParseError& e) {
      throw ParseError(id + ": " + e.what());
    }
    sig.meta = match->meta;
    // Finger captures have no pressure channel.
    if (sig.meta.writing_input == WritingInput::Finger) {
      std::fill(sig.pressure.begin(), sig.pressure.end(), 0.0);
    }
    ds.signatures.push_back({id, match->index, std::move(sig)});
  }
  return ds;
}

// ---- CSVs -----------------------------------------------------------------

namespace {

constexpr std::string_view kComparisonHeader = "enrol_refs,probe_ref,task,truth,forgery_type";
constexpr std::string_view kScoreHeader = "enrol_refs,probe_ref,task,truth,forgery_type,score";

void check_ref(const std::string& ref) {
  if (ref.empty() || ref.find_first_of(",;\n\r") != std::string::npos) {
    throw std::invalid_argument("reference not representable in CSV: '" + ref + "'");
  }
}

std::string comparison_fields(const ComparisonRecord& r) {
  if (auto problems = validate_comparison(r); !problems.empty()) {
    throw std::invalid_argument("invalid comparison: " + problems.front());
  }
  std::string out;
  for (std::size_t i = 0; i < r.enrolment_refs.size(); ++i) {
    check_ref(r.enrolment_refs[i]);
    if (i) out += ';';
    out += r.enrolment_refs[i];
  }
  check_ref(r.probe_ref);
  out += ',';
  out += r.probe_ref;
  out += ',';
  out += std::to_string(task_number(r.task));
  out += ',';
  out += to_string(r.truth);
  out += ',';
  out += to_string(r.forgery_type);
  return out;
}

ComparisonRecord parse_comparison_fields(const std::vector<std::string>& f, std::size_t line_no) {
  auto fail = [&](const std::string& what) {
    return ParseError("line " + std::to_string(line_no) + ": " + what);
  };
  ComparisonRecord r;
  r.enrolment_refs = split(f[0], ';');
  r.probe_ref = f[1];
  const auto task = parse_task(f[2]);
  if (!task) throw fail("bad task '" + f[2] + "'");
  r.task = *task;
  const auto truth = parse_truth(f[3]);
  if (!truth) throw fail("bad truth '" + f[3] + "'");
  r.truth = *truth;
  const auto type = parse_forgery_type(f[4]);
  if (!type) throw fail("bad forgery type '" + f[4] + "'");
  r.forgery_type = *type;
  if (auto problems = validate_comparison(r); !problems.empty()) throw fail(problems.front());
  return r;
}

template <typename Fn>
void for_each_row(std::istream& in, std::string_view header, std::size_t expected_fields, Fn fn) {
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line == header) continue;
    }
    auto fields = split(line, ',');
    if (fields.size() != expected_fields) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(expected_fields) + " fields, found " +
                       std::to_string(fields.size()));
    }
    fn(fields, line_no);
  }
}

}  // namespace

void write_comparisons(std::span<const ComparisonRecord> records, std::ostream& out) {
  out << kComparisonHeader << '\n';
  for (const auto& r : records) out << comparison_fields(r) << '\n';
}

std::vector<ComparisonRecord> read_comparisons(std::istream& in) {
  std::vector<ComparisonRecord> out;
  for_each_row(in, kComparisonHeader, 5, [&](const std::vector<std::string>& f, std::size_t ln) {
    out.push_back(parse_comparison_fields(f, ln));
  });
  return out;
}

std::string format_score(double score) {
  for (int decimals = 9; decimals <= 25; ++decimals) {
    std::string s = format_fixed(score, decimals);
    if (parse_double(s) == score) return s;
  }
  return format_sig(score, 17);
}

void write_scores(std::span<const ScoreRecord> records, std::ostream& out) {
  out << kScoreHeader << '\n';
  for (const auto& r : records) {
    if (!std::isfinite(r.score) || r.score < 0.0 || r.score > 1.0) {
      throw std::invalid_argument("score outside [0,1]: " + format_sig(r.score));
    }
    out << comparison_fields(r.comparison) << ',' << format_score(r.score) << '\n';
  }
}

std::vector<ScoreRecord> read_scores(std::istream& in) {
  std::vector<ScoreRecord> out;
  for_each_row(in, kScoreHeader, 6, [&](const std::vector<std::string>& f, std::size_t ln) {
    ScoreRecord r;
    r.comparison = parse_comparison_fields(f, ln);
    const auto s = parse_double(f[5]);
    if (!s) throw ParseError("line " + std::to_string(ln) + ": non-numeric score");
    if (!std::isfinite(*s) || *s < 0.0 || *s > 1.0) {
      throw ParseError("line " + std::to_string(ln) + ": score outside [0,1]: " + f[5]);
    }
    r.score = *s;
    out.push_back(std::move(r));
  });
  return out;
}

}  // namespace sigbench::io
