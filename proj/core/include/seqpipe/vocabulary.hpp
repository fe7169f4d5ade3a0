#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace seqpipe {

// Token id space: ids 0..2 are reserved specials, real tokens start at 3.
//
// byte_level maps byte b to token b + 3 (size 259) and round-trips any byte
// string. Table vocabularies are loaded from a text file with one token per
// line; the token on line n (0-based) gets id n + 3. Table encoding splits
// input on ASCII whitespace.
class Vocabulary {
  public:
    static constexpr std::int32_t kPadId = 0;
    static constexpr std::int32_t kEosId = 1;
    static constexpr std::int32_t kUnkId = 2;
    static constexpr std::int32_t kNumSpecials = 3;

    static Vocabulary byte_level();
    static Vocabulary from_table_file(const std::filesystem::path& path, bool unk_fallback = true);

    // ref is either the literal "byte_level" or a table file path.
    static Vocabulary resolve(std::string_view ref);

    std::int32_t size() const
    {
        return size_;
    }

    const std::string& ref() const
    {
        return ref_;
    }

    std::vector<std::int32_t> encode(std::string_view text) const;

    // Inverse of encode; special ids (pad, eos, unk) are dropped.
    std::string decode(std::span<const std::int32_t> ids) const;

  private:
    enum class Kind { byte_level, table };

    Vocabulary() = default;

    Kind kind_ = Kind::byte_level;
    std::int32_t size_ = 0;
    bool unk_fallback_ = true;
    std::string ref_;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::int32_t> token_to_id_;
};

} // namespace seqpipe
