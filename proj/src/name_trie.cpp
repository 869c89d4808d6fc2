#include "cfnt/name_trie.hpp"

#include <stdexcept>

namespace cfnt {

NameTrie NameTrie::build(const NameList& names) {
    NameTrie trie;
    for (size_t idx = 0; idx < names.names.size(); ++idx) {
        const TokenSeq& name = names.names[idx];
        if (name.empty()) {
            throw std::runtime_error("name trie: empty name at index " + std::to_string(idx));
        }
        int32_t node = 0;
        for (int32_t tok : name) {
            if (tok < 0) {
                throw std::runtime_error("name trie: negative token id in name");
            }
            auto it = trie.nodes_[node].children.find(tok);
            if (it == trie.nodes_[node].children.end()) {
                int32_t next = static_cast<int32_t>(trie.nodes_.size());
                trie.nodes_.emplace_back();
                trie.nodes_[node].children.emplace(tok, next);
                node = next;
            } else {
                node = it->second;
            }
        }
        // duplicates keep the first occurrence's index
        if (trie.nodes_[node].name_index < 0) {
            trie.nodes_[node].name_index = static_cast<int32_t>(idx);
            ++trie.name_count_;
        }
        trie.max_depth_ = std::max(trie.max_depth_, static_cast<int32_t>(name.size()));
    }
    return trie;
}

const NameTrie::Node& NameTrie::node_at(TrieCursor cursor) const {
    if (cursor.node < 0 || cursor.node >= static_cast<int32_t>(nodes_.size())) {
        throw std::out_of_range("name trie: invalid cursor node");
    }
    return nodes_[cursor.node];
}

std::optional<TrieCursor> NameTrie::step(TrieCursor cursor, int32_t token) const {
    const Node& node = node_at(cursor);
    auto it = node.children.find(token);
    if (it == node.children.end()) return std::nullopt;
    return TrieCursor{it->second, cursor.depth + 1};
}

std::vector<int32_t> NameTrie::allowed_tokens(TrieCursor cursor) const {
    const Node& node = node_at(cursor);
    std::vector<int32_t> out;
    out.reserve(node.children.size());
    for (const auto& [tok, _] : node.children) out.push_back(tok);
    return out;
}

std::optional<int32_t> NameTrie::accepting_name(TrieCursor cursor) const {
    const Node& node = node_at(cursor);
    if (node.name_index < 0) return std::nullopt;
    return node.name_index;
}

std::vector<Span> longest_name_matches(const TokenSeq& tokens, const NameTrie& trie) {
    std::vector<Span> out;
    const int32_t n = static_cast<int32_t>(tokens.size());
    int32_t i = 0;
    while (i < n) {
        TrieCursor cur = trie.root();
        int32_t best_end = -1;
        for (int32_t j = i; j < n; ++j) {
            auto next = trie.step(cur, tokens[j]);
            if (!next) break;
            cur = *next;
            if (trie.accepting_name(cur)) best_end = j + 1;
        }
        if (best_end > i) {
            out.push_back(Span{i, best_end});
            i = best_end;
        } else {
            ++i;
        }
    }
    return out;
}

}  // namespace cfnt
