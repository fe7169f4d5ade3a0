#include "seqpipe/vocabulary.hpp"

#include <cctype>
#include <fstream>

#include "seqpipe/error.hpp"

namespace seqpipe {

Vocabulary Vocabulary::byte_level()
{
    Vocabulary v;
    v.kind_ = Kind::byte_level;
    v.size_ = 256 + kNumSpecials;
    v.ref_ = "byte_level";
    return v;
}

Vocabulary Vocabulary::from_table_file(const std::filesystem::path& path, bool unk_fallback)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw Error(ErrorCode::source_unreadable, "cannot open vocabulary table " + path.string());
    }
    Vocabulary v;
    v.kind_ = Kind::table;
    v.unk_fallback_ = unk_fallback;
    v.ref_ = path.string();
    std::string line;
    while (std::getline(in, line))
    {
        if (!line.empty() && line.back() == '\r')
        {
            line.pop_back();
        }
        const auto id = static_cast<std::int32_t>(v.tokens_.size()) + kNumSpecials;
        v.token_to_id_.emplace(line, id);
        v.tokens_.push_back(std::move(line));
    }
    v.size_ = static_cast<std::int32_t>(v.tokens_.size()) + kNumSpecials;
    if (v.tokens_.empty())
    {
        throw Error(ErrorCode::invalid_spec, "vocabulary table is empty: " + path.string());
    }
    return v;
}

Vocabulary Vocabulary::resolve(std::string_view ref)
{
    if (ref == "byte_level")
    {
        return byte_level();
    }
    return from_table_file(std::filesystem::path(std::string(ref)));
}

std::vector<std::int32_t> Vocabulary::encode(std::string_view text) const
{
    std::vector<std::int32_t> ids;
    if (kind_ == Kind::byte_level)
    {
        ids.reserve(text.size());
        for (char c : text)
        {
            ids.push_back(static_cast<std::int32_t>(static_cast<unsigned char>(c)) + kNumSpecials);
        }
        return ids;
    }
    std::size_t pos = 0;
    while (pos < text.size())
    {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
        {
            ++pos;
        }
        std::size_t end = pos;
        while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end])))
        {
            ++end;
        }
        if (end > pos)
        {
            const std::string token(text.substr(pos, end - pos));
            auto it = token_to_id_.find(token);
            if (it != token_to_id_.end())
            {
                ids.push_back(it->second);
            }
            else if (unk_fallback_)
            {
                ids.push_back(kUnkId);
            }
            else
            {
                throw Error(ErrorCode::unknown_token, "token not in table: \"" + token + "\"");
            }
        }
        pos = end;
    }
    return ids;
}

std::string Vocabulary::decode(std::span<const std::int32_t> ids) const
{
    std::string out;
    bool first = true;
    for (std::int32_t id : ids)
    {
        if (id < kNumSpecials)
        {
            continue;
        }
        if (id >= size_)
        {
            throw Error(ErrorCode::out_of_range,
                        "token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(size_));
        }
        if (kind_ == Kind::byte_level)
        {
            out.push_back(static_cast<char>(static_cast<unsigned char>(id - kNumSpecials)));
        }
        else
        {
            if (!first)
            {
                out.push_back(' ');
            }
            out += tokens_[static_cast<std::size_t>(id - kNumSpecials)];
            first = false;
        }
    }
    return out;
}

} // namespace seqpipe
