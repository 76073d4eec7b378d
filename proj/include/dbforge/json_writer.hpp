#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace dbforge::cli {

// Order-preserving JSON value for report emission. Numbers are
// serialized with 17 significant digits so that parse -> dump is a
// byte-identical round trip; key order is insertion order, which
// keeps reports schema-stable and diffable.
class JsonValue {
public:
    enum class Kind { Null, Bool, Int, Double, String, Array, Object };

    JsonValue() : kind_(Kind::Null) {}
    JsonValue(bool b) : kind_(Kind::Bool), bool_(b) {}
    JsonValue(int v) : kind_(Kind::Int), int_(v) {}
    JsonValue(std::int64_t v) : kind_(Kind::Int), int_(v) {}
    JsonValue(std::uint64_t v) : kind_(Kind::Int), int_(static_cast<std::int64_t>(v)) {}
    JsonValue(double v) : kind_(Kind::Double), double_(v) {}
    JsonValue(const char* s) : kind_(Kind::String), string_(s) {}
    JsonValue(std::string s) : kind_(Kind::String), string_(std::move(s)) {}

    static JsonValue array();
    static JsonValue object();

    Kind kind() const { return kind_; }
    bool is_object() const { return kind_ == Kind::Object; }
    bool is_array() const { return kind_ == Kind::Array; }

    // object access
    JsonValue& set(const std::string& key, JsonValue value);
    const JsonValue* find(const std::string& key) const;
    const JsonValue& at(const std::string& key) const;
    const std::vector<std::pair<std::string, JsonValue>>& members() const { return members_; }

    // array access
    JsonValue& push(JsonValue value);
    const std::vector<JsonValue>& items() const { return items_; }

    // scalar access
    bool as_bool() const;
    std::int64_t as_int() const;
    double as_double() const; // accepts Int too
    const std::string& as_string() const;

    std::string dump(int indent = -1) const;

private:
    void dump_to(std::string& out, int indent, int depth) const;

    Kind kind_;
    bool bool_ = false;
    std::int64_t int_ = 0;
    double double_ = 0.0;
    std::string string_;
    std::vector<std::pair<std::string, JsonValue>> members_;
    std::vector<JsonValue> items_;
};

} // namespace dbforge::cli
