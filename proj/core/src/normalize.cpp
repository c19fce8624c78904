#include "dgeval/normalize.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>

#include <fmt/format.h>

#include "dgeval/judge.hpp"

namespace dgeval {

namespace {

bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}

bool is_trim_byte(unsigned char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case '"': case '\'': case '(': case ')': case '[': case ']':
    case '-': case '*':
      return true;
    default:
      return is_space_byte(c);
  }
}

// Folds a handful of unicode punctuation code points to ASCII; everything
// else passes through untouched (so "°c" survives).
void fold_unicode(std::string_view in, std::string& out) {
  for (std::size_t i = 0; i < in.size();) {
    unsigned char c = static_cast<unsigned char>(in[i]);
    if (c == 0xE2 && i + 2 < in.size()) {
      unsigned char c1 = static_cast<unsigned char>(in[i + 1]);
      unsigned char c2 = static_cast<unsigned char>(in[i + 2]);
      if (c1 == 0x80 && (c2 == 0x93 || c2 == 0x94)) {  // en / em dash
        out.push_back('-');
        i += 3;
        continue;
      }
      if (c1 == 0x88 && c2 == 0x92) {  // minus sign
        out.push_back('-');
        i += 3;
        continue;
      }
      if (c1 == 0x80 && (c2 == 0x98 || c2 == 0x99)) {  // curly single quotes
        out.push_back('\'');
        i += 3;
        continue;
      }
      if (c1 == 0x80 && (c2 == 0x9C || c2 == 0x9D)) {  // curly double quotes
        out.push_back('"');
        i += 3;
        continue;
      }
    }
    if (c == 0xC2 && i + 1 < in.size() &&
        static_cast<unsigned char>(in[i + 1]) == 0xA0) {  // non-breaking space
      out.push_back(' ');
      i += 2;
      continue;
    }
    out.push_back(static_cast<char>(c));
    ++i;
  }
}

}  // namespace

std::string normalize_text(std::string_view raw) {
  std::string folded;
  folded.reserve(raw.size());
  fold_unicode(raw, folded);

  std::string out;
  out.reserve(folded.size());
  bool pending_space = false;
  for (char ch : folded) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (is_space_byte(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }

  std::size_t begin = 0;
  std::size_t end = out.size();
  while (begin < end && is_trim_byte(static_cast<unsigned char>(out[begin]))) ++begin;
  while (end > begin && is_trim_byte(static_cast<unsigned char>(out[end - 1]))) --end;
  return out.substr(begin, end - begin);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (c == '%') {
      flush();
      tokens.emplace_back("%");
      continue;
    }
    bool keep = std::isalnum(c) || c == '/' || c >= 0x80;
    if (!keep && c == '.') {
      // Decimal point only: "17.8" stays whole, "plants." splits.
      bool prev_digit = i > 0 && std::isdigit(static_cast<unsigned char>(text[i - 1]));
      bool next_digit =
          i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]));
      keep = prev_digit && next_digit;
    }
    if (keep) {
      current.push_back(static_cast<char>(c));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

// ===== UnitTable =====

UnitTable UnitTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open unit table '{}'", path.string()));
  UnitTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 3) {
      throw ValidationError(fmt::format("{}:{}: expected 3 tab-separated columns, got {}",
                                        path.string(), line_no, cols.size()));
    }
    try {
      table.add(cols[0], normalize_text(cols[1]), dimension_from_string(normalize_text(cols[2])));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return table;
}

void UnitTable::add(std::string_view surface, std::string_view canonical, Dimension dimension) {
  if (dimension == Dimension::Unknown) {
    throw ValidationError("unit table entries must carry a known dimension");
  }
  std::string key = normalize_text(surface);
  if (key.empty()) throw ValidationError("empty unit surface phrase");
  std::string canon(canonical);
  auto [it, inserted] = canonical_dimension_.try_emplace(canon, dimension);
  if (!inserted && it->second != dimension) {
    throw ValidationError(
        fmt::format("canonical unit '{}' mapped to two dimensions", canon));
  }
  auto [sit, fresh] = by_surface_.try_emplace(key, UnitMapping{canon, dimension});
  if (!fresh && sit->second.canonical != canon) {
    throw ValidationError(fmt::format("surface phrase '{}' mapped twice", key));
  }
}

std::optional<UnitMapping> UnitTable::lookup(std::string_view phrase) const {
  auto it = by_surface_.find(normalize_text(phrase));
  if (it == by_surface_.end()) return std::nullopt;
  return it->second;
}

// ===== Numeric range parsing =====

namespace {

const std::regex kNumberRe("[0-9]+(?:\\.[0-9]+)?");
const std::regex kRangeTailRe("^\\s*(?:-|to)\\s*([0-9]+(?:\\.[0-9]+)?)");

bool is_filler(const std::string& t) {
  return t == "of" || t == "the" || t == "a" || t == "an";
}

// Tries progressively shorter token joins against the table: multi-token
// verbatim joins first, then a rewrite with filler words removed and any
// non-unit words between the head unit and "per" dropped, and only then the
// bare head token. The ordering makes "kg of urea per hectare" resolve as
// kg/ha instead of stopping at the bare "kg" entry.
std::optional<UnitMapping> match_unit(const std::vector<std::string>& tokens,
                                      const UnitTable& table) {
  constexpr std::size_t kMaxTokens = 5;
  auto try_joins = [&](const std::vector<std::string>& ts,
                       std::size_t min_len) -> std::optional<UnitMapping> {
    std::size_t limit = std::min(ts.size(), kMaxTokens);
    for (std::size_t k = limit; k >= min_len; --k) {
      std::string joined;
      for (std::size_t i = 0; i < k; ++i) {
        if (i) joined.push_back(' ');
        joined += ts[i];
      }
      if (auto m = table.lookup(joined)) return m;
    }
    return std::nullopt;
  };

  if (tokens.empty()) return std::nullopt;
  if (auto m = try_joins(tokens, 2)) return m;

  std::vector<std::string> reduced;
  for (const auto& t : tokens) {
    if (!is_filler(t)) reduced.push_back(t);
  }
  auto per = std::find(reduced.begin(), reduced.end(), "per");
  if (per != reduced.end() && per - reduced.begin() > 1) {
    reduced.erase(reduced.begin() + 1, per);
  }
  if (reduced != tokens) {
    if (auto m = try_joins(reduced, 1)) return m;
  }
  return table.lookup(tokens[0]);
}

}  // namespace

std::optional<NumericRange> parse_numeric_range(std::string_view text, const UnitTable& table) {
  std::string n = normalize_text(text);
  std::optional<NumericRange> first_unknown;

  auto begin = std::sregex_iterator(n.begin(), n.end(), kNumberRe);
  auto end = std::sregex_iterator();
  for (auto it = begin; it != end; ++it) {
    std::size_t pos = static_cast<std::size_t>(it->position());
    std::size_t after = pos + static_cast<std::size_t>(it->length());
    if (pos > 0) {
      unsigned char prev = static_cast<unsigned char>(n[pos - 1]);
      // Skip digits glued to an identifier ("b12"), but keep "3ml" style.
      if (std::isalpha(prev) || prev == '.') continue;
    }

    double lo = std::stod(it->str());
    double hi = lo;
    std::string rest = n.substr(after);
    std::smatch range_tail;
    if (std::regex_search(rest, range_tail, kRangeTailRe)) {
      hi = std::stod(range_tail[1].str());
      rest = rest.substr(static_cast<std::size_t>(range_tail.length(0)));
    }
    if (lo > hi) std::swap(lo, hi);

    std::vector<std::string> tokens = tokenize(rest);
    if (auto m = match_unit(tokens, table)) {
      return NumericRange{lo, hi, m->canonical, m->dimension};
    }
    if (!first_unknown) {
      std::string raw_unit;
      if (!tokens.empty() && !std::isdigit(static_cast<unsigned char>(tokens[0][0]))) {
        raw_unit = tokens[0];
      }
      first_unknown = NumericRange{lo, hi, raw_unit, Dimension::Unknown};
    }
  }
  return first_unknown;
}

std::optional<double> range_overlap_fraction(const NumericRange& a, const NumericRange& b) {
  if (a.dimension == Dimension::Unknown || b.dimension == Dimension::Unknown) {
    return std::nullopt;
  }
  if (a.dimension != b.dimension || a.unit != b.unit) return std::nullopt;

  if (a.point() && b.point()) return a.lo == b.lo ? 1.0 : 0.0;
  if (a.point()) return (a.lo >= b.lo && a.lo <= b.hi) ? 1.0 : 0.0;
  if (b.point()) return (b.lo >= a.lo && b.lo <= a.hi) ? 1.0 : 0.0;

  double inter = std::min(a.hi, b.hi) - std::max(a.lo, b.lo);
  if (inter <= 0.0) return 0.0;
  return inter / std::min(a.length(), b.length());
}

// ===== Polarity =====

namespace {

constexpr std::string_view kNegationCues[] = {
    "do not", "don't", "never", "avoid", "should not",
    "must not", "not recommended", "refrain from", "stop using",
};

constexpr std::string_view kActionVerbs[] = {
    "apply",  "spray",     "use",     "sow",      "plant",   "irrigate", "water",
    "add",    "mix",       "drain",   "maintain", "harvest", "store",    "wear",
    "keep",   "provide",   "ensure",  "remove",   "install", "monitor",  "prune",
    "treat",  "broadcast", "spread",  "feed",     "prepare", "transplant",
};

bool contains_word(std::string_view text, std::string_view word) {
  std::size_t pos = 0;
  while ((pos = text.find(word, pos)) != std::string_view::npos) {
    bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(text[pos - 1]));
    std::size_t after = pos + word.size();
    bool right_ok =
        after >= text.size() || !std::isalnum(static_cast<unsigned char>(text[after]));
    if (left_ok && right_ok) return true;
    pos += 1;
  }
  return false;
}

}  // namespace

Polarity detect_polarity(std::string_view normalized_text) {
  for (auto cue : kNegationCues) {
    if (contains_word(normalized_text, cue)) return Polarity::Negate;
  }
  for (auto verb : kActionVerbs) {
    if (contains_word(normalized_text, verb)) return Polarity::Affirm;
  }
  return Polarity::Unknown;
}

FactComponents decompose_components(const AtomicFact& fact, Judge& judge,
                                    const UnitTable& table) {
  if (fact.text.empty()) throw ValidationError("cannot decompose an empty fact text");
  FactComponents c;
  c.quantity = parse_numeric_range(fact.text, table);
  c.polarity = detect_polarity(normalize_text(fact.text));
  try {
    auto resp =
        judge.complete(get_template(TemplateId::Contradiction), {{"fact", fact.text}});
    c.subject = normalize_text(resp.data.value("subject", ""));
    c.attribute = normalize_text(resp.data.value("attribute", ""));
    c.timing = normalize_text(resp.data.value("timing", ""));
    c.method = normalize_text(resp.data.value("method", ""));
  } catch (const JudgeError&) {
    c.partial = true;
  }
  return c;
}

}  // namespace dgeval
