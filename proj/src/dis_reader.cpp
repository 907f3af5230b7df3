#include "rstparse/dis_reader.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "rstparse/errors.hpp"
#include "rstparse/treebank.hpp"

namespace rstparse
{
  namespace
  {
    struct Sexp
    {
      bool is_list = false;
      std::string atom;
      std::vector<Sexp> items;
      std::size_t offset = 0;

      const std::string* head() const
      {
        if (!is_list || items.empty() || items[0].is_list) return nullptr;
        return &items[0].atom;
      }
    };

    class SexpReader
    {
    public:
      SexpReader(std::string_view text, const std::string& origin) : text_(text), origin_(origin) {}

      std::vector<Sexp> read_all()
      {
        std::vector<Sexp> top;
        for (skip_space(); pos_ < text_.size(); skip_space()) {
          if (text_[pos_] != '(') throw ParseError(origin_, pos_, "expected '(' at top level");
          top.push_back(read());
        }
        return top;
      }

    private:
      void skip_space()
      {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }

      Sexp read()
      {
        skip_space();
        if (pos_ >= text_.size()) throw ParseError(origin_, pos_, "unexpected end of input");
        Sexp node;
        node.offset = pos_;
        const char c = text_[pos_];
        if (c == ')') throw ParseError(origin_, pos_, "unbalanced ')'");
        if (c == '(') {
          node.is_list = true;
          ++pos_;
          for (;;) {
            skip_space();
            if (pos_ >= text_.size()) throw ParseError(origin_, node.offset, "unclosed '('");
            if (text_[pos_] == ')') {
              ++pos_;
              return node;
            }
            node.items.push_back(read());
          }
        }
        if (text_.compare(pos_, 2, "_!") == 0) {
          const auto end = text_.find("_!", pos_ + 2);
          if (end == std::string_view::npos) throw ParseError(origin_, pos_, "unterminated _! text");
          node.atom = std::string(text_.substr(pos_ + 2, end - pos_ - 2));
          pos_ = end + 2;
          return node;
        }
        const auto start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '('
               && text_[pos_] != ')')
          ++pos_;
        node.atom = std::string(text_.substr(start, pos_ - start));
        return node;
      }

      std::string_view text_;
      const std::string& origin_;
      std::size_t pos_ = 0;
    };

    bool is_node(const Sexp& s)
    {
      const auto* h = s.head();
      return h && (*h == "Root" || *h == "Nucleus" || *h == "Satellite");
    }

    struct Leaf
    {
      std::string text;
      bool paragraph_end = false;
    };

    class TreeBuilder
    {
    public:
      explicit TreeBuilder(const std::string& origin) : origin_(origin) {}

      TreeNode build(const Sexp& node)
      {
        std::vector<TreeNode> children;
        std::vector<Role> roles;
        bool is_leaf = false;
        int leaf_index = 0;
        std::optional<std::string> text;
        std::optional<Span> span;

        for (std::size_t k = 1; k < node.items.size(); ++k) {
          const auto& item = node.items[k];
          const auto* h = item.head();
          if (!h) throw ParseError(origin_, item.offset, "unexpected token in node");
          if (*h == "span") {
            span = read_span(item);
          } else if (*h == "leaf") {
            is_leaf = true;
            leaf_index = read_int(item, 1);
          } else if (*h == "text") {
            if (item.items.size() != 2 || item.items[1].is_list)
              throw ParseError(origin_, item.offset, "malformed text field");
            text = item.items[1].atom;
          } else if (is_node(item)) {
            roles.push_back(*item.head() == "Satellite" ? Role::Satellite : Role::Nucleus);
            children.push_back(build(item));
          }
          // rel2par and any other annotation: relation labels are not used
        }

        if (is_leaf) {
          if (!children.empty()) throw ParseError(origin_, node.offset, "leaf with children");
          if (leaf_index != static_cast<int>(leaves_.size()) + 1)
            throw ParseError(origin_, node.offset, "leaf " + std::to_string(leaf_index) + " out of order");
          leaves_.push_back(make_leaf(text.value_or("")));
          return TreeNode::leaf(leaf_index);
        }
        if (!span) throw ParseError(origin_, node.offset, "internal node without span");
        if (children.size() < 2) throw ParseError(origin_, node.offset, "internal node with fewer than 2 children");
        auto tree = TreeNode::nary(std::move(children), std::move(roles));
        if (tree.span != *span)
          throw ParseError(origin_, node.offset, "declared span does not match children");
        return tree;
      }

      std::vector<Leaf> take_leaves() { return std::move(leaves_); }

    private:
      int read_int(const Sexp& item, std::size_t k) const
      {
        if (item.items.size() <= k || item.items[k].is_list)
          throw ParseError(origin_, item.offset, "expected integer");
        try {
          std::size_t used = 0;
          int v = std::stoi(item.items[k].atom, &used);
          if (used != item.items[k].atom.size()) throw std::invalid_argument("trailing");
          return v;
        } catch (const std::exception&) {
          throw ParseError(origin_, item.items[k].offset, "expected integer, got '" + item.items[k].atom + "'");
        }
      }

      Span read_span(const Sexp& item) const
      {
        if (item.items.size() != 3) throw ParseError(origin_, item.offset, "span needs two indices");
        return {read_int(item, 1), read_int(item, 2)};
      }

      static Leaf make_leaf(std::string text)
      {
        Leaf leaf;
        for (auto pos = text.find("<P>"); pos != std::string::npos; pos = text.find("<P>")) {
          leaf.paragraph_end = true;
          text.erase(pos, 3);
        }
        leaf.text = std::move(text);
        return leaf;
      }

      const std::string& origin_;
      std::vector<Leaf> leaves_;
    };

    std::vector<std::string> split_ws(const std::string& text)
    {
      std::vector<std::string> out;
      std::istringstream in(text);
      for (std::string tok; in >> tok;) out.push_back(tok);
      return out;
    }

    std::string normalize(std::string_view text)
    {
      std::string out;
      for (char c : text)
        if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      return out;
    }

    // Paragraph id of each EDU start, by locating EDU text in the raw text.
    std::optional<std::vector<int>> align_paragraphs(const std::vector<Leaf>& leaves, std::string_view raw)
    {
      std::string stream;
      std::vector<int> para_of;
      int para = 0;
      bool blank_run = false;
      std::size_t line_start = 0;
      while (line_start <= raw.size()) {
        auto line_end = raw.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = raw.size();
        const auto line = raw.substr(line_start, line_end - line_start);
        const bool blank = std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
        if (blank) {
          blank_run = true;
        } else {
          if (blank_run && !stream.empty()) ++para;
          blank_run = false;
          for (char c : normalize(line)) {
            stream += c;
            para_of.push_back(para);
          }
        }
        line_start = line_end + 1;
      }

      std::vector<int> result;
      std::size_t cursor = 0;
      for (const auto& leaf : leaves) {
        const auto needle = normalize(leaf.text);
        if (needle.empty()) {
          result.push_back(result.empty() ? 0 : result.back());
          continue;
        }
        const auto at = stream.find(needle, cursor);
        if (at == std::string::npos) return std::nullopt;
        result.push_back(para_of[at]);
        cursor = at + needle.size();
      }
      return result;
    }

    std::string slurp(const std::filesystem::path& path)
    {
      std::ifstream in(path, std::ios::binary);
      if (!in) throw InputError("cannot open " + path.string());
      std::ostringstream buf;
      buf << in.rdbuf();
      return buf.str();
    }
  }

  bool looks_like_sentence_end(const std::vector<std::string>& edu, const std::vector<std::string>& next)
  {
    static const std::set<std::string> abbreviations = {"Mr.", "Mrs.", "Ms.", "Dr.", "St.", "Jr.", "Sr.", "vs.", "Prof."};
    if (edu.empty() || next.empty()) return false;
    std::string last = edu.back();
    if (abbreviations.count(last)) return false;
    while (!last.empty() && (last.back() == '"' || last.back() == '\'' || last.back() == ')' || last.back() == '`'))
      last.pop_back();
    if (last.empty()) {
      if (edu.size() < 2) return false;
      last = edu[edu.size() - 2];
    }
    const char end = last.back();
    if (end != '.' && end != '!' && end != '?') return false;
    const unsigned char first = static_cast<unsigned char>(next.front()[0]);
    return std::isupper(first) || std::isdigit(first) || first == '"' || first == '`' || first == '\'' || first == '(';
  }

  DisDocument parse_dis(std::string_view source, const std::string& doc_id, const std::string& origin,
                        std::string_view raw_text, const std::vector<std::string>& edu_lines)
  {
    SexpReader reader(source, origin);
    const auto top = reader.read_all();
    if (top.empty()) throw ParseError(origin, 0, "no tree found");

    TreeBuilder builder(origin);
    std::vector<TreeNode> roots;
    for (const auto& expr : top) {
      if (!is_node(expr)) throw ParseError(origin, expr.offset, "expected Root/Nucleus/Satellite node");
      roots.push_back(builder.build(expr));
    }
    auto leaves = builder.take_leaves();
    const int n = static_cast<int>(leaves.size());

    if (!edu_lines.empty() && static_cast<int>(edu_lines.size()) != n)
      throw IntegrityError(origin + ": tree has " + std::to_string(n) + " EDUs but companion EDU file has "
                           + std::to_string(edu_lines.size()));

    TreeNode tree;
    try {
      tree = roots.size() == 1 ? std::move(roots.front()) : merge_multi_root(std::move(roots));
      validate_tree(tree, n);
    } catch (const IntegrityError& e) {
      throw IntegrityError(origin + ": " + e.what());
    }

    std::vector<std::vector<std::string>> tokens;
    tokens.reserve(n);
    for (const auto& leaf : leaves) tokens.push_back(split_ws(leaf.text));

    DisDocument out;
    std::vector<int> paragraph_breaks;
    std::optional<std::vector<int>> aligned;
    if (!raw_text.empty()) aligned = align_paragraphs(leaves, raw_text);
    if (aligned) {
      out.paragraphs = ParagraphSource::CompanionText;
      for (int k = 1; k < n; ++k)
        if ((*aligned)[k] != (*aligned)[k - 1]) paragraph_breaks.push_back(k);
    } else if (std::any_of(leaves.begin(), leaves.end(), [](const Leaf& l) { return l.paragraph_end; })) {
      out.paragraphs = ParagraphSource::Markers;
      for (int k = 1; k < n; ++k)
        if (leaves[k - 1].paragraph_end) paragraph_breaks.push_back(k);
    }

    std::vector<int> sentence_breaks;
    for (int k = 1; k < n; ++k)
      if (looks_like_sentence_end(tokens[k - 1], tokens[k])) sentence_breaks.push_back(k);

    auto layout = DocLayout::from_breaks(n, sentence_breaks, paragraph_breaks);
    out.document = make_document(doc_id, std::move(tokens), std::move(layout), std::move(tree));
    return out;
  }

  DisDocument read_dis_file(const std::filesystem::path& path)
  {
    const auto source = slurp(path);
    auto base = path;
    base.replace_extension();  // wsj_0600.out.dis -> wsj_0600.out
    std::string raw;
    if (std::filesystem::is_regular_file(base)) raw = slurp(base);
    std::vector<std::string> edu_lines;
    auto edus_path = base;
    edus_path += ".edus";
    if (std::filesystem::is_regular_file(edus_path)) {
      std::istringstream in(slurp(edus_path));
      for (std::string line; std::getline(in, line);)
        if (line.find_first_not_of(" \t\r") != std::string::npos) edu_lines.push_back(line);
    }
    auto id = base;
    if (id.extension() == ".out") id.replace_extension();
    return parse_dis(source, id.filename().string(), path.string(), raw, edu_lines);
  }

  std::vector<Document> load_dis_corpus(const std::filesystem::path& directory)
  {
    if (!std::filesystem::is_directory(directory)) throw InputError(directory.string() + " is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(directory))
      if (entry.is_regular_file() && entry.path().extension() == ".dis") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<Document> docs;
    docs.reserve(files.size());
    for (const auto& file : files) docs.push_back(read_dis_file(file).document);
    return docs;
  }
}
