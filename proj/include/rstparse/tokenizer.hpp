#ifndef RSTPARSE_TOKENIZER_HPP
#define RSTPARSE_TOKENIZER_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "rstparse/tree.hpp"

namespace rstparse
{
  using TokenId = std::int32_t;

  struct SpecialTokens
  {
    TokenId cls = 0;
    TokenId pad = 1;
    TokenId sep = 2;
    TokenId mask = 3;
  };

  class Tokenizer
  {
  public:
    virtual ~Tokenizer() = default;

    // Subword ids of one EDU. `continues` is true when the EDU follows other
    // text in the document (affects leading-space handling).
    virtual std::vector<TokenId> encode_edu(const std::vector<std::string>& words, bool continues) const = 0;
    virtual SpecialTokens specials() const = 0;
  };

  // Token ids of every EDU of a document, in order.
  std::vector<std::vector<TokenId>> tokenize_document(const Document& doc, const Tokenizer& tokenizer);

  // One id per whitespace word, from a 64-bit FNV-1a hash. Needs no vocabulary.
  class HashTokenizer : public Tokenizer
  {
  public:
    std::vector<TokenId> encode_edu(const std::vector<std::string>& words, bool continues) const override;
    SpecialTokens specials() const override { return {}; }

    static TokenId word_id(const std::string& word);
  };

  std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t basis = 0xcbf29ce484222325ULL);

  // Byte-level BPE as used by GPT-2/RoBERTa, read from vocab.json and merges.txt.
  class BpeTokenizer : public Tokenizer
  {
  public:
    BpeTokenizer(std::unordered_map<std::string, TokenId> vocab, std::vector<std::pair<std::string, std::string>> merges);

    static std::unique_ptr<BpeTokenizer> load(const std::filesystem::path& model_dir);

    std::vector<TokenId> encode_edu(const std::vector<std::string>& words, bool continues) const override;
    SpecialTokens specials() const override { return specials_; }

    // Raw text to ids, without control tokens.
    std::vector<TokenId> encode(const std::string& text) const;

    // Pre-tokenization pieces, before byte mapping.
    static std::vector<std::string> pretokenize(const std::string& text);

    std::size_t vocab_size() const { return vocab_.size(); }

  private:
    std::vector<std::string> bpe(const std::string& piece) const;

    std::unordered_map<std::string, TokenId> vocab_;
    std::map<std::pair<std::string, std::string>, int> ranks_;
    SpecialTokens specials_;
    TokenId unk_ = -1;
    mutable std::mutex cache_mutex_;
    mutable std::unordered_map<std::string, std::vector<std::string>> cache_;
  };
}

#endif
