#include "rstparse/tokenizer.hpp"

#include <array>
#include <climits>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rstparse/errors.hpp"

namespace rstparse
{
  std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t basis)
  {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = basis;
    for (std::size_t i = 0; i < size; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::vector<std::vector<TokenId>> tokenize_document(const Document& doc, const Tokenizer& tokenizer)
  {
    std::vector<std::vector<TokenId>> out;
    out.reserve(doc.edus.size());
    for (const auto& edu : doc.edus) out.push_back(tokenizer.encode_edu(edu.tokens, edu.index > 1));
    return out;
  }

  TokenId HashTokenizer::word_id(const std::string& word)
  {
    return 4 + static_cast<TokenId>(fnv1a(word.data(), word.size()) % (1u << 30));
  }

  std::vector<TokenId> HashTokenizer::encode_edu(const std::vector<std::string>& words, bool) const
  {
    std::vector<TokenId> ids;
    ids.reserve(words.size());
    for (const auto& w : words) ids.push_back(word_id(w));
    return ids;
  }

  namespace
  {
    void append_utf8(std::string& out, char32_t cp)
    {
      if (cp < 0x80) {
        out += static_cast<char>(cp);
      } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
      } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
      } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
      }
    }

    // Decodes one code point at `i` and advances it; invalid bytes decode as themselves.
    char32_t next_codepoint(const std::string& s, std::size_t& i)
    {
      const auto c = static_cast<unsigned char>(s[i]);
      int extra = 0;
      char32_t cp = c;
      if (c >= 0xF0) { extra = 3; cp = c & 0x07; }
      else if (c >= 0xE0) { extra = 2; cp = c & 0x0F; }
      else if (c >= 0xC0) { extra = 1; cp = c & 0x1F; }
      if (extra && i + extra >= s.size()) extra = 0;
      if (extra == 0) {
        ++i;
        return c;
      }
      for (int k = 1; k <= extra; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
      i += extra + 1;
      return cp;
    }

    // GPT-2's reversible byte -> printable code point table.
    const std::array<std::string, 256>& byte_symbols()
    {
      static const std::array<std::string, 256> table = [] {
        std::array<std::string, 256> t;
        int extra = 0;
        for (int b = 0; b < 256; ++b) {
          const bool printable = (b >= '!' && b <= '~') || (b >= 0xA1 && b <= 0xAC) || (b >= 0xAE && b <= 0xFF);
          append_utf8(t[b], printable ? static_cast<char32_t>(b) : static_cast<char32_t>(256 + extra++));
        }
        return t;
      }();
      return table;
    }

    enum class CharClass { Letter, Digit, Space, Other };

    CharClass classify(char32_t cp)
    {
      if (cp < 0x80) {
        if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return CharClass::Letter;
        if (cp >= '0' && cp <= '9') return CharClass::Digit;
        if (cp == ' ' || (cp >= '\t' && cp <= '\r')) return CharClass::Space;
        return CharClass::Other;
      }
      if (cp == 0x85 || cp == 0xA0 || cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029
          || cp == 0x202F || cp == 0x205F || cp == 0x3000)
        return CharClass::Space;
      // Latin-1 and general punctuation blocks.
      if ((cp >= 0xA1 && cp <= 0xBF && cp != 0xAA && cp != 0xB5 && cp != 0xBA) || cp == 0xD7 || cp == 0xF7
          || (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E))
        return CharClass::Other;
      return CharClass::Letter;
    }

    std::unordered_map<std::string, TokenId> read_vocab(const std::filesystem::path& path)
    {
      std::ifstream in(path);
      if (!in) throw InputError("cannot open " + path.string());
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 0, e.what());
      }
      std::unordered_map<std::string, TokenId> vocab;
      for (const auto& item : j.items()) vocab.emplace(item.key(), item.value().get<TokenId>());
      return vocab;
    }
  }

  std::vector<std::string> BpeTokenizer::pretokenize(const std::string& text)
  {
    std::vector<char32_t> cps;
    std::vector<std::size_t> offsets;
    for (std::size_t i = 0; i < text.size();) {
      offsets.push_back(i);
      cps.push_back(next_codepoint(text, i));
    }
    offsets.push_back(text.size());
    const std::size_t n = cps.size();
    auto cls = [&](std::size_t k) { return classify(cps[k]); };
    auto piece = [&](std::size_t a, std::size_t b) { return text.substr(offsets[a], offsets[b] - offsets[a]); };

    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < n) {
      if (cps[i] == '\'') {
        bool matched = false;
        for (const char* suffix : {"s", "t", "re", "ve", "m", "ll", "d"}) {
          const std::size_t len = std::char_traits<char>::length(suffix);
          bool ok = i + len < n;
          for (std::size_t k = 0; ok && k < len; ++k) ok = cps[i + 1 + k] == static_cast<char32_t>(suffix[k]);
          if (ok) {
            out.push_back(piece(i, i + 1 + len));
            i += 1 + len;
            matched = true;
            break;
          }
        }
        if (matched) continue;
      }
      std::size_t start = i;
      std::size_t j = i;
      if (cps[j] == ' ' && j + 1 < n && cls(j + 1) != CharClass::Space) ++j;
      const auto c = cls(j);
      if (c != CharClass::Space) {
        std::size_t k = j;
        while (k < n && cls(k) == c) ++k;
        out.push_back(piece(start, k));
        i = k;
        continue;
      }
      std::size_t k = i;
      while (k < n && cls(k) == CharClass::Space) ++k;
      if (k < n && k - i >= 2) k -= 1;  // leave one space for the next word
      out.push_back(piece(i, k));
      i = k;
    }
    return out;
  }

  BpeTokenizer::BpeTokenizer(std::unordered_map<std::string, TokenId> vocab,
                             std::vector<std::pair<std::string, std::string>> merges)
    : vocab_(std::move(vocab))
  {
    for (std::size_t r = 0; r < merges.size(); ++r) ranks_.emplace(std::move(merges[r]), static_cast<int>(r));
    auto special = [this](const char* name) {
      auto it = vocab_.find(name);
      if (it == vocab_.end()) throw InputError(std::string("BPE vocabulary lacks ") + name);
      return it->second;
    };
    specials_.cls = special("<s>");
    specials_.pad = special("<pad>");
    specials_.sep = special("</s>");
    specials_.mask = special("<mask>");
    if (auto it = vocab_.find("<unk>"); it != vocab_.end()) unk_ = it->second;
  }

  std::unique_ptr<BpeTokenizer> BpeTokenizer::load(const std::filesystem::path& model_dir)
  {
    auto vocab = read_vocab(model_dir / "vocab.json");
    const auto merges_path = model_dir / "merges.txt";
    std::ifstream in(merges_path);
    if (!in) throw InputError("cannot open " + merges_path.string());
    std::vector<std::pair<std::string, std::string>> merges;
    std::size_t line_number = 0;
    for (std::string line; std::getline(in, line);) {
      ++line_number;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.rfind("#version", 0) == 0) continue;
      const auto space = line.find(' ');
      if (space == std::string::npos) throw ParseError(merges_path.string(), line_number, "expected 'a b'");
      merges.emplace_back(line.substr(0, space), line.substr(space + 1));
    }
    return std::make_unique<BpeTokenizer>(std::move(vocab), std::move(merges));
  }

  std::vector<std::string> BpeTokenizer::bpe(const std::string& piece) const
  {
    {
      std::lock_guard lock(cache_mutex_);
      if (auto it = cache_.find(piece); it != cache_.end()) return it->second;
    }
    std::vector<std::string> symbols;
    for (unsigned char b : piece) symbols.push_back(byte_symbols()[b]);
    while (symbols.size() > 1) {
      int best_rank = INT_MAX;
      std::size_t best = 0;
      for (std::size_t k = 0; k + 1 < symbols.size(); ++k) {
        auto it = ranks_.find({symbols[k], symbols[k + 1]});
        if (it != ranks_.end() && it->second < best_rank) {
          best_rank = it->second;
          best = k;
        }
      }
      if (best_rank == INT_MAX) break;
      const std::string first = symbols[best], second = symbols[best + 1];
      std::vector<std::string> merged;
      for (std::size_t k = 0; k < symbols.size();) {
        if (k + 1 < symbols.size() && symbols[k] == first && symbols[k + 1] == second) {
          merged.push_back(first + second);
          k += 2;
        } else {
          merged.push_back(symbols[k++]);
        }
      }
      symbols = std::move(merged);
    }
    std::lock_guard lock(cache_mutex_);
    cache_.emplace(piece, symbols);
    return symbols;
  }

  std::vector<TokenId> BpeTokenizer::encode(const std::string& text) const
  {
    std::vector<TokenId> ids;
    for (const auto& piece : pretokenize(text)) {
      for (const auto& symbol : bpe(piece)) {
        auto it = vocab_.find(symbol);
        if (it != vocab_.end()) {
          ids.push_back(it->second);
        } else if (unk_ >= 0) {
          ids.push_back(unk_);
        } else {
          throw InputError("BPE symbol '" + symbol + "' missing from vocabulary");
        }
      }
    }
    return ids;
  }

  std::vector<TokenId> BpeTokenizer::encode_edu(const std::vector<std::string>& words, bool continues) const
  {
    std::string text;
    for (const auto& w : words) {
      if (!text.empty() || continues) text += ' ';
      text += w;
    }
    return encode(text);
  }
}
