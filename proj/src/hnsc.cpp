#include "semdist/hnsc.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "semdist/error.hpp"
#include "semdist/random.hpp"

namespace semdist {
namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(Pos pos) {
  switch (pos) {
    case Pos::noun: return "NOUN";
    case Pos::verb: return "VERB";
    case Pos::adj: return "ADJ";
    case Pos::other: return "OTHER";
  }
  return "OTHER";
}

Pos parse_pos(std::string_view tag) {
  if (tag == "NOUN") return Pos::noun;
  if (tag == "VERB") return Pos::verb;
  if (tag == "ADJ") return Pos::adj;
  return Pos::other;
}

bool is_replaceable(Pos pos) { return pos != Pos::other; }

bool PosLexicon::add(std::string_view token, Pos pos) {
  std::string key = lowercase(token);
  auto [it, inserted] = tags_.try_emplace(key, pos);
  if (inserted) pools_[static_cast<std::size_t>(pos)].push_back(std::move(key));
  return inserted;
}

Pos PosLexicon::tag(std::string_view token) const {
  const auto it = tags_.find(std::string(token));
  return it == tags_.end() ? Pos::other : it->second;
}

PosLexicon parse_lexicon(std::istream& in, const WarningSink& warn) {
  PosLexicon lexicon;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw Error(ErrorKind::parse_error,
                  "lexicon line " + std::to_string(line_no) + ": expected 'token<TAB>POS'");
    }
    const std::string_view token = trim(std::string_view(line).substr(0, tab));
    const std::string_view tag = trim(std::string_view(line).substr(tab + 1));
    if (token.empty() || std::any_of(token.begin(), token.end(), is_space)) {
      throw Error(ErrorKind::parse_error,
                  "lexicon line " + std::to_string(line_no) + ": token must be non-empty without spaces");
    }
    const Pos pos = parse_pos(tag);
    if (!lexicon.add(token, pos) && warn) {
      const Pos kept = lexicon.tag(lowercase(token));
      warn("lexicon line " + std::to_string(line_no) + ": duplicate token '" + std::string(token) +
           "' (" + std::string(tag) + ") ignored, keeping " + std::string(to_string(kept)));
    }
  }
  return lexicon;
}

PosLexicon load_lexicon(const std::filesystem::path& path, const WarningSink& warn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::file_not_found, "lexicon not found: " + path.string());
  return parse_lexicon(in, warn);
}

TokenizedCaption tokenize(std::string_view caption, const PosLexicon& lexicon) {
  TokenizedCaption out;
  std::size_t i = 0;
  while (i < caption.size()) {
    while (i < caption.size() && is_space(caption[i])) ++i;
    std::size_t j = i;
    while (j < caption.size() && !is_space(caption[j])) ++j;
    std::string_view word = caption.substr(i, j - i);
    while (!word.empty() && is_punct(word.front())) word.remove_prefix(1);
    while (!word.empty() && is_punct(word.back())) word.remove_suffix(1);
    if (!word.empty()) {
      out.spans.push_back({static_cast<std::size_t>(word.data() - caption.data()), word.size()});
      out.tokens.push_back(lowercase(word));
      out.tags.push_back(lexicon.tag(out.tokens.back()));
      if (is_replaceable(out.tags.back())) out.replaceable.push_back(out.tokens.size() - 1);
    }
    i = j;
  }
  return out;
}

std::size_t replacement_count(double ratio, std::size_t n_replaceable) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw Error(ErrorKind::invalid_argument, "ratio must lie in [0, 1]");
  }
  // The slack keeps products such as 0.6 * 5 = 3.0000000000000004 from rounding up.
  const double k = std::ceil(ratio * static_cast<double>(n_replaceable) - 1e-9);
  return std::min(n_replaceable, static_cast<std::size_t>(std::max(0.0, k)));
}

HardNegative construct_hard_negative(const TokenizedCaption& caption, const PosLexicon& lexicon,
                                     double ratio, std::uint64_t seed) {
  const std::size_t k = replacement_count(ratio, caption.replaceable.size());
  HardNegative out;
  out.tokens = caption.tokens;
  if (k == 0) return out;

  Rng rng = make_rng(seed);
  std::vector<std::size_t> slots = caption.replaceable;
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, slots.size() - 1);
    std::swap(slots[i], slots[pick(rng)]);
  }
  slots.resize(k);
  std::sort(slots.begin(), slots.end());

  for (std::size_t idx : slots) {
    const std::string& original = caption.tokens[idx];
    const Pos pos = caption.tags[idx];
    const auto& pool = lexicon.pool(pos);
    const auto self = std::find(pool.begin(), pool.end(), original);
    const std::size_t others = pool.size() - (self == pool.end() ? 0 : 1);
    if (others == 0) {
      throw Error(ErrorKind::invalid_argument, "lexicon pool for " + std::string(to_string(pos)) +
                                                   " has no alternative to '" + original + "'");
    }
    std::uniform_int_distribution<std::size_t> pick(0, others - 1);
    std::size_t choice = pick(rng);
    if (self != pool.end() && choice >= static_cast<std::size_t>(self - pool.begin())) ++choice;

    out.replaced_indices.push_back(idx);
    out.originals.push_back(original);
    out.replacements.push_back(pool[choice]);
    out.tokens[idx] = pool[choice];
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string render_hard_negative(std::string_view caption, const TokenizedCaption& tokenized,
                                 const HardNegative& negative) {
  std::string out;
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < negative.replaced_indices.size(); ++k) {
    const TokenSpan span = tokenized.spans.at(negative.replaced_indices[k]);
    out.append(caption.substr(cursor, span.offset - cursor));
    out.append(negative.replacements[k]);
    cursor = span.offset + span.length;
  }
  out.append(caption.substr(cursor));
  return out;
}

}  // namespace semdist
