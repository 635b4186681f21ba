#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace semdist {

enum class Pos : std::uint8_t { noun = 0, verb = 1, adj = 2, other = 3 };

std::string_view to_string(Pos pos);
// "NOUN", "VERB", "ADJ"; anything else maps to Pos::other.
Pos parse_pos(std::string_view tag);
bool is_replaceable(Pos pos);

/// token -> POS tags plus, per POS, the candidate tokens in first-seen order.
class PosLexicon {
 public:
  // Returns false (and leaves the lexicon unchanged) if the token already has
  // a tag. Tokens are lowercased before insertion.
  bool add(std::string_view token, Pos pos);

  Pos tag(std::string_view token) const;
  const std::vector<std::string>& pool(Pos pos) const { return pools_[static_cast<std::size_t>(pos)]; }
  std::size_t size() const { return tags_.size(); }

 private:
  std::unordered_map<std::string, Pos> tags_;
  std::array<std::vector<std::string>, 4> pools_;
};

using WarningSink = std::function<void(const std::string&)>;

// TSV `token<TAB>POS` per line. Blank lines are skipped; a line without
// exactly two fields throws parse_error naming the 1-based line number.
// Duplicate tokens keep the first tag and emit a warning.
PosLexicon parse_lexicon(std::istream& in, const WarningSink& warn = {});
PosLexicon load_lexicon(const std::filesystem::path& path, const WarningSink& warn = {});

struct TokenSpan {
  std::size_t offset = 0;  // byte offset into the source caption
  std::size_t length = 0;
};

struct TokenizedCaption {
  std::vector<std::string> tokens;
  std::vector<Pos> tags;
  std::vector<TokenSpan> spans;          // where each token sits in the source
  std::vector<std::size_t> replaceable;  // strictly increasing
};

// Lowercases, splits on whitespace, strips ASCII punctuation from token
// edges (dropping tokens that become empty) and tags each token.
TokenizedCaption tokenize(std::string_view caption, const PosLexicon& lexicon);

struct HardNegative {
  std::vector<std::string> tokens;
  std::vector<std::size_t> replaced_indices;  // ascending
  std::vector<std::string> originals;          // parallel to replaced_indices
  std::vector<std::string> replacements;
};

// Number of positions replaced for a given ratio: ceil(ratio * n_replaceable).
std::size_t replacement_count(double ratio, std::size_t n_replaceable);

// Replaces ceil(ratio * |replaceable|) uniformly chosen replaceable tokens by
// a different token of the same POS drawn uniformly from the lexicon pool.
HardNegative construct_hard_negative(const TokenizedCaption& caption, const PosLexicon& lexicon,
                                     double ratio, std::uint64_t seed);

std::string join_tokens(const std::vector<std::string>& tokens);

// The source caption with only the replaced tokens substituted; spacing,
// punctuation and casing of everything else are kept.
std::string render_hard_negative(std::string_view caption, const TokenizedCaption& tokenized,
                                 const HardNegative& negative);

}  // namespace semdist
