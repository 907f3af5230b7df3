#ifndef RSTPARSE_DIS_READER_HPP
#define RSTPARSE_DIS_READER_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rstparse/tree.hpp"

namespace rstparse
{
  // Where a document's paragraph breaks came from.
  enum class ParagraphSource { CompanionText, Markers, None };

  struct DisDocument
  {
    Document document;
    ParagraphSource paragraphs = ParagraphSource::None;
  };

  // Parses the Lisp-style bracketing of one .dis file. Relation labels are
  // read and dropped. Several top-level trees are merged right-branching (NN).
  // `raw_text`, when non-empty, is the companion text with blank-line
  // separated paragraphs. `edu_lines`, when non-empty, is the companion
  // EDU list whose length must match the tree.
  DisDocument parse_dis(std::string_view source, const std::string& doc_id, const std::string& origin,
                        std::string_view raw_text = {}, const std::vector<std::string>& edu_lines = {});

  DisDocument read_dis_file(const std::filesystem::path& path);

  // All *.dis files in `directory`, sorted by file name. Trees are kept as
  // annotated (possibly n-ary); see binarize().
  std::vector<Document> load_dis_corpus(const std::filesystem::path& directory);

  // Terminal punctuation followed by a capitalized or quoted token.
  bool looks_like_sentence_end(const std::vector<std::string>& edu, const std::vector<std::string>& next);
}

#endif
