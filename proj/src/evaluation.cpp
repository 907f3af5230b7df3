#include "rstparse/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "rstparse/errors.hpp"
#include "rstparse/treebank.hpp"

namespace rstparse
{
  std::string_view to_string(Metric m) { return m == Metric::Original ? "original_parseval" : "rst_parseval"; }
  std::string_view to_string(Facet f) { return f == Facet::Structure ? "structure" : "nuclearity"; }

  std::string_view to_string(SpanLabel l)
  {
    switch (l) {
    case SpanLabel::NN: return "NN";
    case SpanLabel::NS: return "NS";
    case SpanLabel::SN: return "SN";
    case SpanLabel::N: return "N";
    case SpanLabel::S: return "S";
    }
    return "?";
  }

  namespace
  {
    SpanLabel label_of(Nuclearity nuc)
    {
      switch (nuc) {
      case Nuclearity::NN: return SpanLabel::NN;
      case Nuclearity::NS: return SpanLabel::NS;
      case Nuclearity::SN: return SpanLabel::SN;
      }
      return SpanLabel::NN;
    }

    void require_binary(const TreeNode& node)
    {
      if (!node.is_leaf() && !node.is_binary()) throw std::invalid_argument("span extraction needs a binary tree");
    }

    void collect_original(const TreeNode& node, ScoredSpanSet& out)
    {
      if (node.is_leaf()) return;
      require_binary(node);
      out.push_back({node.span, label_of(*node.nuclearity())});
      for (const auto& child : node.children) collect_original(child, out);
    }

    void collect_rst(const TreeNode& node, ScoredSpanSet& out)
    {
      if (node.is_leaf()) return;
      require_binary(node);
      for (std::size_t k = 0; k < 2; ++k) {
        const auto& child = node.children[k];
        out.push_back({child.span, node.roles[k] == Role::Nucleus ? SpanLabel::N : SpanLabel::S});
        collect_rst(child, out);
      }
    }

    long count_matches(const ScoredSpanSet& gold, const ScoredSpanSet& pred, Facet facet)
    {
      // Both sorted by span, unique spans.
      long matched = 0;
      auto g = gold.begin();
      auto p = pred.begin();
      while (g != gold.end() && p != pred.end()) {
        if (g->span < p->span) ++g;
        else if (p->span < g->span) ++p;
        else {
          if (facet == Facet::Structure || g->label == p->label) ++matched;
          ++g;
          ++p;
        }
      }
      return matched;
    }

    ScoredSpanSet extract(const TreeNode& tree, Metric metric, bool include_root)
    {
      return metric == Metric::Original ? spans_original(tree, include_root) : spans_rst(tree);
    }

    void check_pairs(const std::vector<TreeNode>& gold, const std::vector<TreeNode>& pred)
    {
      if (gold.size() != pred.size())
        throw IntegrityError("evaluation: " + std::to_string(gold.size()) + " gold trees but "
                             + std::to_string(pred.size()) + " predicted trees");
      for (std::size_t k = 0; k < gold.size(); ++k)
        if (gold[k].span != pred[k].span)
          throw IntegrityError("evaluation: document " + std::to_string(k) + " has " + std::to_string(gold[k].span.size())
                               + " gold EDUs but " + std::to_string(pred[k].span.size()) + " predicted EDUs");
    }

    std::string format_percent(double v)
    {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%6.2f", v);
      return buf;
    }
  }

  ScoredSpanSet spans_original(const TreeNode& tree, bool include_root)
  {
    ScoredSpanSet out;
    collect_original(tree, out);
    if (!include_root && !tree.is_leaf())
      std::erase_if(out, [&](const ScoredSpan& s) { return s.span == tree.span; });
    std::sort(out.begin(), out.end());
    return out;
  }

  ScoredSpanSet spans_rst(const TreeNode& tree)
  {
    ScoredSpanSet out;
    collect_rst(tree, out);
    std::sort(out.begin(), out.end());
    return out;
  }

  PRF prf_from_counts(long matched, long gold, long predicted)
  {
    PRF r;
    r.matched = matched;
    r.gold = gold;
    r.predicted = predicted;
    if (gold == 0 && predicted == 0) {
      r.precision = r.recall = r.f1 = 100.0;
      return r;
    }
    r.precision = predicted ? 100.0 * static_cast<double>(matched) / static_cast<double>(predicted) : 0.0;
    r.recall = gold ? 100.0 * static_cast<double>(matched) / static_cast<double>(gold) : 0.0;
    const double sum = r.precision + r.recall;
    r.f1 = sum > 0.0 ? 2.0 * r.precision * r.recall / sum : 0.0;
    return r;
  }

  PRF micro_f1(const std::vector<TreeNode>& gold, const std::vector<TreeNode>& pred, Metric metric, Facet facet,
               bool include_root)
  {
    check_pairs(gold, pred);
    long matched = 0, n_gold = 0, n_pred = 0;
    for (std::size_t k = 0; k < gold.size(); ++k) {
      const auto g = extract(gold[k], metric, include_root);
      const auto p = extract(pred[k], metric, include_root);
      matched += count_matches(g, p, facet);
      n_gold += static_cast<long>(g.size());
      n_pred += static_cast<long>(p.size());
    }
    return prf_from_counts(matched, n_gold, n_pred);
  }

  const PRF& ScoreReport::get(Metric metric, Facet facet, bool include_root) const
  {
    for (const auto& e : entries)
      if (e.metric == metric && e.facet == facet && (metric == Metric::RstParseval || e.include_root == include_root))
        return e.score;
    throw std::out_of_range("score report has no " + std::string(to_string(metric)) + "/"
                            + std::string(to_string(facet)) + " entry");
  }

  std::string ScoreReport::to_text() const
  {
    std::ostringstream out;
    out << "documents: " << n_docs << "\n";
    out << "metric             root      facet        P       R       F1\n";
    for (const auto& e : entries) {
      std::string name(to_string(e.metric));
      name.resize(18, ' ');
      std::string root = e.metric == Metric::RstParseval ? "-" : (e.include_root ? "included" : "excluded");
      root.resize(9, ' ');
      std::string facet(to_string(e.facet));
      facet.resize(10, ' ');
      out << name << " " << root << " " << facet << " " << format_percent(e.score.precision) << "  "
          << format_percent(e.score.recall) << "  " << format_percent(e.score.f1) << "\n";
    }
    return out.str();
  }

  nlohmann::ordered_json ScoreReport::to_json() const
  {
    auto records = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
      nlohmann::ordered_json r;
      r["metric"] = to_string(e.metric);
      r["facet"] = to_string(e.facet);
      r["include_root"] = e.include_root;
      r["P"] = e.score.precision;
      r["R"] = e.score.recall;
      r["F1"] = e.score.f1;
      r["n_docs"] = n_docs;
      r["n_gold_spans"] = e.score.gold;
      r["n_pred_spans"] = e.score.predicted;
      records.push_back(std::move(r));
    }
    return records;
  }

  ScoreReport score_trees(const std::vector<TreeNode>& gold, const std::vector<TreeNode>& pred,
                          const EvalOptions& options)
  {
    check_pairs(gold, pred);
    ScoreReport report;
    report.n_docs = static_cast<long>(gold.size());
    auto add = [&](Metric metric, bool root) {
      for (auto facet : {Facet::Structure, Facet::Nuclearity})
        report.entries.push_back({metric, facet, root, micro_f1(gold, pred, metric, facet, root)});
    };
    if (options.original) {
      if (options.both_root_conventions) {
        add(Metric::Original, false);
        add(Metric::Original, true);
      } else {
        add(Metric::Original, options.include_root);
      }
    }
    if (options.rst) add(Metric::RstParseval, false);
    return report;
  }

  ScoreReport evaluate_corpus(const std::vector<Document>& gold, const std::vector<Document>& pred,
                              const EvalOptions& options)
  {
    std::map<std::string, const Document*> by_id;
    for (const auto& d : pred) {
      if (!by_id.emplace(d.doc_id, &d).second) throw InputError("duplicate predicted doc_id: " + d.doc_id);
    }
    std::vector<std::string> missing_pred, missing_gold;
    std::vector<TreeNode> gold_trees, pred_trees;
    std::map<std::string, bool> seen;
    for (const auto& g : gold) {
      if (!seen.emplace(g.doc_id, true).second) throw InputError("duplicate gold doc_id: " + g.doc_id);
      auto it = by_id.find(g.doc_id);
      if (it == by_id.end()) {
        missing_pred.push_back(g.doc_id);
        continue;
      }
      if (!g.gold_tree) throw InputError("gold document " + g.doc_id + " has no tree");
      if (!it->second->gold_tree) throw InputError("predicted document " + g.doc_id + " has no tree");
      gold_trees.push_back(binarize(*g.gold_tree));
      pred_trees.push_back(binarize(*it->second->gold_tree));
      if (gold_trees.back().span != pred_trees.back().span)
        throw IntegrityError("document " + g.doc_id + ": gold covers " + std::to_string(gold_trees.back().span.size())
                             + " EDUs, prediction covers " + std::to_string(pred_trees.back().span.size()));
    }
    for (const auto& d : pred)
      if (!seen.contains(d.doc_id)) missing_gold.push_back(d.doc_id);
    if (!missing_pred.empty() || !missing_gold.empty()) {
      std::string msg = "doc_id mismatch between gold and predictions";
      auto list = [&msg](const char* what, const std::vector<std::string>& ids) {
        if (ids.empty()) return;
        msg += "; ";
        msg += what;
        msg += ":";
        for (const auto& id : ids) msg += " " + id;
      };
      list("missing from predictions", missing_pred);
      list("missing from gold", missing_gold);
      throw InputError(msg);
    }
    return score_trees(gold_trees, pred_trees, options);
  }
}
