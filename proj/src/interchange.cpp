#include "rstparse/interchange.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "rstparse/errors.hpp"

namespace rstparse
{
  using ordered_json = nlohmann::ordered_json;

  namespace
  {
    void collect(const TreeNode& node, std::vector<Constituent>& out)
    {
      if (node.is_leaf()) return;
      auto nuc = node.nuclearity();
      if (!nuc) throw IntegrityError("interchange records hold binary trees only; binarize first");
      out.push_back({node.span, *nuc});
      for (const auto& child : node.children) collect(child, out);
    }

    class ConstituentParser
    {
    public:
      explicit ConstituentParser(const std::vector<Constituent>& items) : items_(items) {}

      TreeNode build(Span span)
      {
        if (span.first == span.last) return TreeNode::leaf(span.first);
        if (cursor_ >= items_.size() || items_[cursor_].span != span)
          throw IntegrityError("constituents do not form a binary tree: missing node (" + std::to_string(span.first)
                               + "," + std::to_string(span.last) + ")");
        const auto nuc = items_[cursor_++].nuclearity;
        int split = span.first;  // last EDU of the left child
        if (cursor_ < items_.size() && items_[cursor_].span.first == span.first && items_[cursor_].span.last < span.last)
          split = items_[cursor_].span.last;
        auto left = build({span.first, split});
        auto right = build({split + 1, span.last});
        return TreeNode::join(std::move(left), std::move(right), nuc);
      }

      bool exhausted() const { return cursor_ == items_.size(); }

    private:
      const std::vector<Constituent>& items_;
      std::size_t cursor_ = 0;
    };

    std::vector<std::string> split_ws(const std::string& text)
    {
      std::vector<std::string> out;
      std::istringstream in(text);
      for (std::string tok; in >> tok;) out.push_back(tok);
      return out;
    }

    std::vector<int> int_list(const ordered_json& value, const char* field)
    {
      if (!value.is_array()) throw InputError(std::string("'") + field + "' must be an array");
      std::vector<int> out;
      for (const auto& v : value) {
        if (!v.is_number_integer()) throw InputError(std::string("'") + field + "' must hold integers");
        out.push_back(v.get<int>());
      }
      return out;
    }
  }

  std::vector<Constituent> constituents(const TreeNode& tree)
  {
    std::vector<Constituent> out;
    collect(tree, out);
    return out;
  }

  TreeNode tree_from_constituents(std::vector<Constituent> items, int n)
  {
    if (static_cast<int>(items.size()) != n - 1)
      throw IntegrityError("expected " + std::to_string(n - 1) + " constituents for " + std::to_string(n)
                           + " EDUs, got " + std::to_string(items.size()));
    std::sort(items.begin(), items.end(), [](const Constituent& a, const Constituent& b) {
      if (a.span.first != b.span.first) return a.span.first < b.span.first;
      return a.span.last > b.span.last;
    });
    for (std::size_t k = 1; k < items.size(); ++k)
      if (items[k].span == items[k - 1].span)
        throw IntegrityError("duplicate constituent (" + std::to_string(items[k].span.first) + ","
                             + std::to_string(items[k].span.last) + ")");
    ConstituentParser parser(items);
    auto tree = parser.build({1, n});
    if (!parser.exhausted()) throw IntegrityError("constituents do not form a binary tree over the document");
    return tree;
  }

  std::string serialize_document(const Document& doc)
  {
    ordered_json record;
    record["doc_id"] = doc.doc_id;
    auto edus = ordered_json::array();
    for (const auto& edu : doc.edus) edus.push_back(edu.tokens);
    record["edus"] = std::move(edus);
    record["sentence_breaks"] = doc.layout.sentence_breaks();
    record["paragraph_breaks"] = doc.layout.paragraph_breaks();
    auto cons = ordered_json::array();
    if (doc.gold_tree)
      for (const auto& c : constituents(*doc.gold_tree))
        cons.push_back(ordered_json::array({c.span.first, c.span.last, std::string(to_string(c.nuclearity))}));
    record["constituents"] = std::move(cons);
    return record.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
  }

  Document deserialize_document(const std::string& line, const std::string& origin, std::size_t line_number)
  {
    try {
      const auto record = ordered_json::parse(line);
      if (!record.is_object()) throw InputError("record is not an object");
      static const char* known[] = {"doc_id", "edus", "sentence_breaks", "paragraph_breaks", "constituents"};
      for (const auto& item : record.items())
        if (std::find(std::begin(known), std::end(known), item.key()) == std::end(known))
          throw InputError("unknown field '" + item.key() + "'");
      for (const char* required : {"doc_id", "edus"})
        if (!record.contains(required)) throw InputError(std::string("missing field '") + required + "'");

      if (!record["doc_id"].is_string()) throw InputError("'doc_id' must be a string");
      const auto& edus_json = record["edus"];
      if (!edus_json.is_array() || edus_json.empty()) throw InputError("'edus' must be a non-empty array");
      std::vector<std::vector<std::string>> edus;
      for (const auto& edu : edus_json) {
        if (!edu.is_array()) throw InputError("each EDU must be an array of tokens");
        std::vector<std::string> tokens;
        for (const auto& tok : edu) {
          if (!tok.is_string()) throw InputError("EDU tokens must be strings");
          tokens.push_back(tok.get<std::string>());
        }
        edus.push_back(std::move(tokens));
      }
      const int n = static_cast<int>(edus.size());

      std::vector<int> sentence_breaks, paragraph_breaks;
      if (record.contains("sentence_breaks")) sentence_breaks = int_list(record["sentence_breaks"], "sentence_breaks");
      if (record.contains("paragraph_breaks")) paragraph_breaks = int_list(record["paragraph_breaks"], "paragraph_breaks");

      std::optional<TreeNode> tree;
      if (record.contains("constituents")) {
        const auto& cons = record["constituents"];
        if (!cons.is_array()) throw InputError("'constituents' must be an array");
        std::vector<Constituent> items;
        for (const auto& c : cons) {
          if (!c.is_array() || c.size() != 3 || !c[0].is_number_integer() || !c[1].is_number_integer()
              || !c[2].is_string())
            throw InputError("constituent must be [i, j, nuclearity]");
          const auto label = c[2].get<std::string>();
          const auto nuc = parse_nuclearity(label);
          if (!nuc) throw InputError("nuclearity '" + label + "' is not one of NN, NS, SN");
          const Span span{c[0].get<int>(), c[1].get<int>()};
          if (span.first < 1 || span.last > n || span.first >= span.last)
            throw InputError("constituent (" + std::to_string(span.first) + "," + std::to_string(span.last)
                             + ") is not a multi-EDU span within 1.." + std::to_string(n));
          items.push_back({span, *nuc});
        }
        if (n == 1 || !items.empty()) tree = tree_from_constituents(std::move(items), n);
      }
      auto layout = DocLayout::from_breaks(n, sentence_breaks, paragraph_breaks);
      return make_document(record["doc_id"].get<std::string>(), std::move(edus), std::move(layout), std::move(tree));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(origin, line_number, std::string("invalid JSON: ") + e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const InputError& e) {
      throw ParseError(origin, line_number, e.what());
    }
  }

  void write_corpus(std::ostream& out, const std::vector<Document>& docs)
  {
    for (const auto& doc : docs) out << serialize_document(doc) << '\n';
  }

  void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs)
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    write_corpus(out, docs);
    if (!out) throw InputError("failed writing " + path.string());
  }

  std::vector<Document> read_corpus(std::istream& in, const std::string& origin)
  {
    std::vector<Document> docs;
    std::size_t line_number = 0;
    for (std::string line; std::getline(in, line);) {
      ++line_number;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      docs.push_back(deserialize_document(line, origin, line_number));
    }
    return docs;
  }

  std::vector<Document> read_corpus(const std::filesystem::path& path)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    return read_corpus(in, path.string());
  }

  std::vector<Document> read_segmented(std::istream& in, const std::string& origin, std::vector<std::string>* skipped)
  {
    std::vector<Document> docs;
    std::vector<std::vector<std::string>> edus;
    std::vector<int> sentence_breaks, paragraph_breaks;
    std::string doc_id;
    int doc_count = 0;

    auto flush = [&]() {
      if (doc_id.empty() && edus.empty()) return;
      std::string id = doc_id;
      if (id.empty()) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "doc-%04d", doc_count);
        id = buf;
      }
      ++doc_count;
      if (edus.empty()) {
        if (skipped) skipped->push_back(id);
      } else {
        const int n = static_cast<int>(edus.size());
        // A break marker after the last EDU is meaningless.
        std::erase_if(sentence_breaks, [n](int k) { return k >= n; });
        std::erase_if(paragraph_breaks, [n](int k) { return k >= n; });
        auto layout = DocLayout::from_breaks(n, sentence_breaks, paragraph_breaks);
        docs.push_back(make_document(id, std::move(edus), std::move(layout)));
      }
      edus.clear();
      sentence_breaks.clear();
      paragraph_breaks.clear();
      doc_id.clear();
    };

    std::size_t line_number = 0;
    for (std::string line; std::getline(in, line);) {
      ++line_number;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) {
        flush();
      } else if (line.rfind("#DOC", 0) == 0) {
        flush();
        auto id = line.substr(4);
        id.erase(0, id.find_first_not_of(" \t"));
        if (id.empty()) throw ParseError(origin, line_number, "#DOC without an id");
        doc_id = id;
      } else if (line == "#PARA") {
        if (!edus.empty()) paragraph_breaks.push_back(static_cast<int>(edus.size()));
      } else if (line == "#SENT") {
        if (!edus.empty()) sentence_breaks.push_back(static_cast<int>(edus.size()));
      } else {
        edus.push_back(split_ws(line));
      }
    }
    flush();
    return docs;
  }
}
