#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ospo {

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

// Half-open character interval [begin, end) into the source text.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct TokenizedResponse {
  std::string text;
  std::vector<std::string> tokens;
  std::vector<TokenSpan> spans;  // one per token, strictly increasing

  std::size_t size() const { return tokens.size(); }
};

// Punctuation detached from word boundaries during tokenization. Internal
// occurrences (e.g. the apostrophe in "it's") stay inside the word token.
inline bool is_detachable_punct(char c) {
  constexpr std::string_view set = ".,;:!?\"'()";
  return set.find(c) != std::string_view::npos;
}

inline bool is_punct_token(std::string_view tok) {
  if (tok.empty()) return false;
  return std::all_of(tok.begin(), tok.end(),
                     [](char c) { return is_detachable_punct(c); });
}

// Whitespace split with leading/trailing punctuation peeled off as separate
// single-character tokens. Token spans index into the original text, so the
// input is always reconstructible.
inline TokenizedResponse tokenize(std::string_view text) {
  TokenizedResponse out;
  out.text.assign(text);
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto push = [&](std::size_t b, std::size_t e) {
    out.tokens.emplace_back(text.substr(b, e - b));
    out.spans.push_back({b, e});
  };
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= n) break;
    std::size_t j = i;
    while (j < n && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    // word run [i, j): peel leading punctuation, then trailing, keep the core
    std::size_t begin = i;
    while (begin < j && is_detachable_punct(text[begin])) {
      push(begin, begin + 1);
      ++begin;
    }
    std::size_t core_end = j;
    while (core_end > begin && is_detachable_punct(text[core_end - 1]))
      --core_end;
    if (core_end > begin) push(begin, core_end);
    for (std::size_t p = core_end; p < j; ++p) push(p, p + 1);
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

// A contiguous token span acting as one attribution unit ("player").
struct Segment {
  std::size_t index = 0;       // 0-based id within the segmentation
  std::size_t token_begin = 0;
  std::size_t token_end = 0;   // half-open [token_begin, token_end)
  std::string text;

  std::size_t token_count() const { return token_end - token_begin; }
};

struct PhraseConfig {
  std::size_t max_segments = 16;
  std::size_t max_phrase_tokens = 3;
  std::vector<std::string> stopwords = {"and", "or", "with", "for"};
};

namespace detail {

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

inline std::string slice_text(const TokenizedResponse& resp, std::size_t tb,
                              std::size_t te) {
  const std::size_t b = resp.spans[tb].begin;
  const std::size_t e = resp.spans[te - 1].end;
  return resp.text.substr(b, e - b);
}

}  // namespace detail

// Splits the token stream into phrase-level segments. Punctuation tokens and
// coordinating stopwords act as separators and belong to no segment. Runs
// longer than max_phrase_tokens are chunked into balanced pieces. When more
// than max_segments would result, the excess tail merges into the last one.
inline std::vector<Segment> segment_phrases(const TokenizedResponse& resp,
                                            const PhraseConfig& cfg = {}) {
  if (cfg.max_segments == 0)
    throw std::invalid_argument("segment_phrases: max_segments must be >= 1");
  if (cfg.max_phrase_tokens == 0)
    throw std::invalid_argument(
        "segment_phrases: max_phrase_tokens must be >= 1");

  auto is_separator = [&](std::size_t t) {
    if (is_punct_token(resp.tokens[t])) return true;
    const std::string low = detail::lowercase(resp.tokens[t]);
    return std::find(cfg.stopwords.begin(), cfg.stopwords.end(), low) !=
           cfg.stopwords.end();
  };

  std::vector<Segment> segments;
  const std::size_t n = resp.size();
  std::size_t t = 0;
  while (t < n) {
    while (t < n && is_separator(t)) ++t;
    if (t >= n) break;
    std::size_t run_end = t;
    while (run_end < n && !is_separator(run_end)) ++run_end;
    // balanced chunking: ceil(len / max) chunks, longer chunks first
    const std::size_t len = run_end - t;
    const std::size_t n_chunks =
        (len + cfg.max_phrase_tokens - 1) / cfg.max_phrase_tokens;
    const std::size_t base = len / n_chunks;
    const std::size_t rem = len % n_chunks;
    std::size_t b = t;
    for (std::size_t c = 0; c < n_chunks; ++c) {
      const std::size_t sz = base + (c < rem ? 1 : 0);
      segments.push_back(Segment{0, b, b + sz, {}});
      b += sz;
    }
    t = run_end;
  }

  if (segments.size() > cfg.max_segments) {
    segments[cfg.max_segments - 1].token_end = segments.back().token_end;
    segments.resize(cfg.max_segments);
  }
  for (std::size_t j = 0; j < segments.size(); ++j) {
    segments[j].index = j;
    segments[j].text =
        detail::slice_text(resp, segments[j].token_begin, segments[j].token_end);
  }
  return segments;
}

// Sentence-level segmentation: a sentence ends at a '.', '!' or '?' token
// (the terminator belongs to its sentence) or at a newline in the gap before
// the next token. A trailing unterminated run forms the final segment.
inline std::vector<Segment> segment_sentences(const TokenizedResponse& resp) {
  std::vector<Segment> segments;
  const std::size_t n = resp.size();
  auto boundary_after = [&](std::size_t t) {
    const std::string& tok = resp.tokens[t];
    if (tok == "." || tok == "!" || tok == "?") return true;
    if (t + 1 < n) {
      const std::size_t gb = resp.spans[t].end;
      const std::size_t ge = resp.spans[t + 1].begin;
      for (std::size_t p = gb; p < ge; ++p)
        if (resp.text[p] == '\n') return true;
    }
    return false;
  };
  std::size_t begin = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (boundary_after(t) || t + 1 == n) {
      segments.push_back(
          Segment{segments.size(), begin, t + 1,
                  detail::slice_text(resp, begin, t + 1)});
      begin = t + 1;
    }
  }
  return segments;
}

// ---------------------------------------------------------------------------
// Segment -> token weights
// ---------------------------------------------------------------------------

struct SegmentWeightMatrix {
  std::size_t n_segments = 0;
  std::size_t n_tokens = 0;
  std::vector<double> weights;  // row-major N x T

  double at(std::size_t j, std::size_t t) const {
    return weights[j * n_tokens + t];
  }
  double& at(std::size_t j, std::size_t t) { return weights[j * n_tokens + t]; }
};

// Indicator weights: W[j][t] = 1 iff token t lies inside segment j's range.
// Segments are exact token partitions, so fractional coverage never occurs.
inline SegmentWeightMatrix build_weight_matrix(
    const std::vector<Segment>& segments, std::size_t n_tokens) {
  SegmentWeightMatrix w;
  w.n_segments = segments.size();
  w.n_tokens = n_tokens;
  w.weights.assign(w.n_segments * n_tokens, 0.0);

  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (const Segment& s : segments) {
    if (s.token_begin >= s.token_end)
      throw std::invalid_argument("build_weight_matrix: empty segment range");
    if (s.token_end > n_tokens)
      throw std::invalid_argument(
          "build_weight_matrix: segment range exceeds token count");
    ranges.emplace_back(s.token_begin, s.token_end);
  }
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i)
    if (ranges[i].first < ranges[i - 1].second)
      throw std::invalid_argument("build_weight_matrix: overlapping segments");

  for (std::size_t j = 0; j < segments.size(); ++j)
    for (std::size_t t = segments[j].token_begin; t < segments[j].token_end;
         ++t)
      w.at(j, t) = 1.0;
  return w;
}

}  // namespace ospo
