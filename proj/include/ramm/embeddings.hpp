#pragma once
// Embedding tables keyed by item id, in a textual (JSON lines) or binary form.
//
// Binary layout, all integers little-endian:
//   "RAMMEMB1" | u32 count | u32 dim | count × (u16 id_len | id bytes | dim × f32)

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <type_traits>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ramm/corpus.hpp"
#include "ramm/error.hpp"
#include "ramm/linalg.hpp"

namespace ramm {

using EmbeddingTable = std::map<std::string, Vec>;

inline constexpr std::array<char, 8> kEmbeddingMagic{'R', 'A', 'M', 'M', 'E', 'M', 'B', '1'};

namespace detail {

template <class T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <class T>
T read_le(std::istream& in) {
    static_assert(std::is_integral_v<T>);
    std::make_unsigned_t<T> v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        const int c = in.get();
        if (c == EOF) throw IoError("unexpected end of file");
        v |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return static_cast<T>(v);
}

inline void write_f32(std::ostream& out, float f) { write_le(out, std::bit_cast<std::uint32_t>(f)); }
inline float read_f32(std::istream& in) { return std::bit_cast<float>(read_le<std::uint32_t>(in)); }

inline void write_f64(std::ostream& out, double d) { write_le(out, std::bit_cast<std::uint64_t>(d)); }
inline double read_f64(std::istream& in) { return std::bit_cast<double>(read_le<std::uint64_t>(in)); }

inline void check_row(const std::string& id, const Vec& v, std::size_t expected_dim, std::size_t line) {
    if (v.size() != expected_dim) {
        const std::string msg = "embedding \"" + id + "\" has dimension " + std::to_string(v.size()) +
                                ", expected " + std::to_string(expected_dim);
        if (line > 0) throw ParseError(line, msg);
        throw DimensionError(msg);
    }
    for (double x : v) {
        if (!std::isfinite(x)) {
            const std::string msg = "embedding \"" + id + "\" contains a non-finite value";
            if (line > 0) throw ParseError(line, msg);
            throw NumericError(msg);
        }
    }
}

}  // namespace detail

inline EmbeddingTable parse_embeddings_text(std::istream& in, std::size_t expected_dim) {
    EmbeddingTable table;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto j = detail::parse_line(text, line);
        const std::string id = detail::require_string(j, "id", line);
        const auto& vj = detail::require_field(j, "vector", line);
        if (!vj.is_array()) throw ParseError(line, "field \"vector\" must be an array");
        Vec v;
        for (const auto& x : vj) {
            if (x.is_number()) {
                v.push_back(x.get<double>());
            } else if (x.is_null()) {
                // nlohmann writes NaN/Inf as null
                v.push_back(std::numeric_limits<double>::quiet_NaN());
            } else {
                throw ParseError(line, "field \"vector\" contains a non-number");
            }
        }
        detail::check_row(id, v, expected_dim, line);
        if (!table.emplace(id, std::move(v)).second) throw ParseError(line, "duplicate id \"" + id + "\"");
    }
    return table;
}

inline EmbeddingTable parse_embeddings_binary(std::istream& in, std::size_t expected_dim) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kEmbeddingMagic) throw IoError("bad embedding table magic");
    const auto count = detail::read_le<std::uint32_t>(in);
    const auto dim = detail::read_le<std::uint32_t>(in);
    if (dim != expected_dim) {
        throw DimensionError("embedding table has dimension " + std::to_string(dim) + ", expected " +
                             std::to_string(expected_dim));
    }
    EmbeddingTable table;
    for (std::uint32_t e = 0; e < count; ++e) {
        const auto len = detail::read_le<std::uint16_t>(in);
        std::string id(len, '\0');
        in.read(id.data(), len);
        if (!in) throw IoError("unexpected end of file in embedding id");
        Vec v(dim);
        for (auto& x : v) x = detail::read_f32(in);
        detail::check_row(id, v, expected_dim, 0);
        if (!table.emplace(id, std::move(v)).second) throw Error("duplicate id \"" + id + "\"");
    }
    return table;
}

/// Loads a table, detecting the binary form by its magic. When `corpus` is
/// given, every id must belong to it.
inline EmbeddingTable load_embeddings(const std::string& path, std::size_t expected_dim,
                                      const Corpus* corpus = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding table " + path);
    std::array<char, 8> head{};
    in.read(head.data(), head.size());
    const bool binary = in.gcount() == 8 && head == kEmbeddingMagic;
    in.clear();
    in.seekg(0);
    EmbeddingTable table = binary ? parse_embeddings_binary(in, expected_dim) : parse_embeddings_text(in, expected_dim);
    if (corpus) {
        for (const auto& [id, v] : table) {
            if (!corpus->find(id)) throw Error("embedding id \"" + id + "\" is not in the corpus");
        }
    }
    return table;
}

/// Reads the dimension recorded in a table without a caller-supplied hint.
inline std::size_t peek_embedding_dim(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding table " + path);
    std::array<char, 8> head{};
    in.read(head.data(), head.size());
    if (in.gcount() == 8 && head == kEmbeddingMagic) {
        detail::read_le<std::uint32_t>(in);
        return detail::read_le<std::uint32_t>(in);
    }
    in.clear();
    in.seekg(0);
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        return detail::require_field(detail::parse_line(text, line), "vector", line).size();
    }
    throw Error("embedding table " + path + " is empty");
}

inline void write_embeddings_text(std::ostream& out, const EmbeddingTable& table) {
    for (const auto& [id, v] : table) {
        nlohmann::json j;
        j["id"] = id;
        j["vector"] = v;
        out << j.dump() << '\n';
    }
}

inline void write_embeddings_binary(std::ostream& out, const EmbeddingTable& table) {
    std::size_t dim = table.empty() ? 0 : table.begin()->second.size();
    out.write(kEmbeddingMagic.data(), kEmbeddingMagic.size());
    detail::write_le(out, static_cast<std::uint32_t>(table.size()));
    detail::write_le(out, static_cast<std::uint32_t>(dim));
    for (const auto& [id, v] : table) {
        require_same_size(v.size(), dim, "write_embeddings_binary");
        if (id.size() > 0xffff) throw Error("embedding id too long: " + id.substr(0, 32) + "...");
        detail::write_le(out, static_cast<std::uint16_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
        for (double x : v) detail::write_f32(out, static_cast<float>(x));
    }
}

inline void save_embeddings(const std::string& path, const EmbeddingTable& table, bool binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write embedding table " + path);
    if (binary) {
        write_embeddings_binary(out, table);
    } else {
        write_embeddings_text(out, table);
    }
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace ramm
