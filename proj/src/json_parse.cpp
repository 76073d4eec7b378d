#include <json.hpp>

#include "dbforge/error.hpp"
#include "dbforge/report.hpp"

namespace dbforge::cli {

namespace {

JsonValue convert(const nlohmann::ordered_json& j) {
    switch (j.type()) {
        case nlohmann::ordered_json::value_t::null: return JsonValue();
        case nlohmann::ordered_json::value_t::boolean: return JsonValue(j.get<bool>());
        case nlohmann::ordered_json::value_t::number_integer:
            return JsonValue(j.get<std::int64_t>());
        case nlohmann::ordered_json::value_t::number_unsigned:
            return JsonValue(static_cast<std::int64_t>(j.get<std::uint64_t>()));
        case nlohmann::ordered_json::value_t::number_float: return JsonValue(j.get<double>());
        case nlohmann::ordered_json::value_t::string: return JsonValue(j.get<std::string>());
        case nlohmann::ordered_json::value_t::array: {
            JsonValue out = JsonValue::array();
            for (const auto& item : j) out.push(convert(item));
            return out;
        }
        case nlohmann::ordered_json::value_t::object: {
            JsonValue out = JsonValue::object();
            for (const auto& [key, value] : j.items()) out.set(key, convert(value));
            return out;
        }
        default: throw FormatError("unsupported JSON value type");
    }
}

} // namespace

JsonValue parse_json(const std::string& text) {
    nlohmann::ordered_json parsed;
    try {
        parsed = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::ordered_json::parse_error& e) {
        throw FormatError(std::string("JSON parse error: ") + e.what());
    }
    return convert(parsed);
}

} // namespace dbforge::cli
