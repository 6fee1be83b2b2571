#include "spectrum/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

namespace spectrum {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

Vocabulary::Vocabulary() {
    tokens_ = {"<pad>", "<bos>", "<eos>", "<unk>"};
    for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) index_[tokens_[i]] = i;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& token_lists) {
    std::set<std::string> unique;
    for (const auto& list : token_lists) unique.insert(list.begin(), list.end());
    Vocabulary v;
    for (const auto& t : unique) {
        if (v.index_.count(t)) continue;
        v.index_[t] = static_cast<int>(v.tokens_.size());
        v.tokens_.push_back(t);
    }
    return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    if (tokens.size() < 4 || tokens[0] != "<pad>" || tokens[1] != "<bos>" ||
        tokens[2] != "<eos>" || tokens[3] != "<unk>")
        throw std::runtime_error("vocabulary: reserved token block malformed");
    for (size_t i = 4; i < tokens.size(); ++i) {
        v.index_[tokens[i]] = static_cast<int>(v.tokens_.size());
        v.tokens_.push_back(tokens[i]);
    }
    return v;
}

int Vocabulary::id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("vocabulary: id out of range");
    return tokens_[static_cast<size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const { return index_.count(token) > 0; }

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
    std::vector<std::string> out;
    for (int i : ids) {
        if (i == kPad || i == kBos || i == kEos) continue;
        out.push_back(token(i));
    }
    return out;
}

} // namespace spectrum
