#ifndef RSTPARSE_INTERCHANGE_HPP
#define RSTPARSE_INTERCHANGE_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rstparse/tree.hpp"

namespace rstparse
{
  // One document per line:
  //   {"doc_id": ..., "edus": [[tok, ...], ...], "sentence_breaks": [...],
  //    "paragraph_breaks": [...], "constituents": [[i, j, "NS"], ...]}
  // Constituents list every internal node of a binary tree in pre-order;
  // leaves are implicit. A multi-EDU record without constituents has no tree.
  std::string serialize_document(const Document& doc);

  // `line_number` is only used for error messages.
  Document deserialize_document(const std::string& line, const std::string& origin = "<record>",
                                std::size_t line_number = 1);

  // Constituent list of a binary tree in pre-order.
  struct Constituent
  {
    Span span;
    Nuclearity nuclearity;
  };
  std::vector<Constituent> constituents(const TreeNode& tree);

  // Rebuilds a binary tree over (1, n); throws IntegrityError if the list is
  // not exactly the internal nodes of one.
  TreeNode tree_from_constituents(std::vector<Constituent> items, int n);

  void write_corpus(std::ostream& out, const std::vector<Document>& docs);
  void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs);
  std::vector<Document> read_corpus(std::istream& in, const std::string& origin);
  std::vector<Document> read_corpus(const std::filesystem::path& path);

  // Plain segmented text: one EDU per line, blank line between documents,
  // "#PARA" and "#SENT" lines for paragraph and sentence breaks and an
  // optional "#DOC <id>" line naming the next document. Documents without
  // EDUs are dropped and reported through `skipped`.
  std::vector<Document> read_segmented(std::istream& in, const std::string& origin,
                                       std::vector<std::string>* skipped = nullptr);
}

#endif
