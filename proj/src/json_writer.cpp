#include "dbforge/json_writer.hpp"

#include <cmath>
#include <cstdio>

#include "dbforge/error.hpp"

namespace dbforge::cli {

JsonValue JsonValue::array() {
    JsonValue v;
    v.kind_ = Kind::Array;
    return v;
}

JsonValue JsonValue::object() {
    JsonValue v;
    v.kind_ = Kind::Object;
    return v;
}

JsonValue& JsonValue::set(const std::string& key, JsonValue value) {
    if (kind_ != Kind::Object) throw ValidationError("set() on a non-object JSON value");
    for (auto& [k, v] : members_) {
        if (k == key) {
            v = std::move(value);
            return v;
        }
    }
    members_.emplace_back(key, std::move(value));
    return members_.back().second;
}

const JsonValue* JsonValue::find(const std::string& key) const {
    if (kind_ != Kind::Object) return nullptr;
    for (const auto& [k, v] : members_) {
        if (k == key) return &v;
    }
    return nullptr;
}

const JsonValue& JsonValue::at(const std::string& key) const {
    const JsonValue* v = find(key);
    if (!v) throw ValidationError("missing JSON key '" + key + "'");
    return *v;
}

JsonValue& JsonValue::push(JsonValue value) {
    if (kind_ != Kind::Array) throw ValidationError("push() on a non-array JSON value");
    items_.push_back(std::move(value));
    return items_.back();
}

bool JsonValue::as_bool() const {
    if (kind_ != Kind::Bool) throw ValidationError("JSON value is not a boolean");
    return bool_;
}

std::int64_t JsonValue::as_int() const {
    if (kind_ != Kind::Int) throw ValidationError("JSON value is not an integer");
    return int_;
}

double JsonValue::as_double() const {
    if (kind_ == Kind::Int) return static_cast<double>(int_);
    if (kind_ != Kind::Double) throw ValidationError("JSON value is not a number");
    return double_;
}

const std::string& JsonValue::as_string() const {
    if (kind_ != Kind::String) throw ValidationError("JSON value is not a string");
    return string_;
}

namespace {

void append_escaped(std::string& out, const std::string& s) {
    out.push_back('"');
    for (const char ch : s) {
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(ch) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", ch);
                    out += buf;
                } else {
                    out.push_back(ch);
                }
        }
    }
    out.push_back('"');
}

void append_indent(std::string& out, int indent, int depth) {
    if (indent < 0) return;
    out.push_back('\n');
    out.append(static_cast<std::size_t>(indent) * depth, ' ');
}

} // namespace

void JsonValue::dump_to(std::string& out, int indent, int depth) const {
    switch (kind_) {
        case Kind::Null: out += "null"; break;
        case Kind::Bool: out += bool_ ? "true" : "false"; break;
        case Kind::Int: out += std::to_string(int_); break;
        case Kind::Double: {
            if (!std::isfinite(double_)) {
                out += "null"; // JSON has no inf/nan
                break;
            }
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", double_);
            out += buf;
            break;
        }
        case Kind::String: append_escaped(out, string_); break;
        case Kind::Array: {
            out.push_back('[');
            for (std::size_t i = 0; i < items_.size(); ++i) {
                if (i > 0) out.push_back(',');
                append_indent(out, indent, depth + 1);
                items_[i].dump_to(out, indent, depth + 1);
            }
            if (!items_.empty()) append_indent(out, indent, depth);
            out.push_back(']');
            break;
        }
        case Kind::Object: {
            out.push_back('{');
            for (std::size_t i = 0; i < members_.size(); ++i) {
                if (i > 0) out.push_back(',');
                append_indent(out, indent, depth + 1);
                append_escaped(out, members_[i].first);
                out.push_back(':');
                if (indent >= 0) out.push_back(' ');
                members_[i].second.dump_to(out, indent, depth + 1);
            }
            if (!members_.empty()) append_indent(out, indent, depth);
            out.push_back('}');
            break;
        }
    }
}

std::string JsonValue::dump(int indent) const {
    std::string out;
    dump_to(out, indent, 0);
    return out;
}

} // namespace dbforge::cli
