#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace spectrum {

// Lowercases and splits on any non-alphanumeric character, so punctuation
// never survives into tokens.
std::vector<std::string> tokenize(const std::string& text);

// Token <-> index map with fixed reserved entries.
class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;

    Vocabulary();

    // Content tokens are added in sorted order after the reserved block,
    // so the mapping is a pure function of the token set.
    static Vocabulary build(const std::vector<std::vector<std::string>>& token_lists);
    static Vocabulary from_tokens(const std::vector<std::string>& tokens_in_index_order);

    int id(const std::string& token) const; // kUnk when absent
    const std::string& token(int id) const;
    bool contains(const std::string& token) const;
    int size() const { return static_cast<int>(tokens_.size()); }

    std::vector<int> encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const std::vector<int>& ids) const; // skips reserved ids

    const std::vector<std::string>& tokens() const { return tokens_; }

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

} // namespace spectrum
