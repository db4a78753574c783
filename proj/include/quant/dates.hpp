#pragma once
#include <compare>
#include <string>

namespace quant {

// Calendar day stored as a serial count of days since 1970-01-01.
struct Date {
    int serial = 0;
    auto operator<=>(const Date&) const = default;
    Date operator+(int days) const { return Date{serial + days}; }
    int operator-(Date other) const { return serial - other.serial; }
};

Date make_date(int year, int month, int day);
void civil_from_date(Date dt, int& year, int& month, int& day);
int weekday(Date dt);  // 0 = Sunday .. 6 = Saturday

Date parse_date(const std::string& iso);  // "YYYY-MM-DD"
std::string format_date(Date dt);
bool looks_like_date(const std::string& token);

}  // namespace quant
