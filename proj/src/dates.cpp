#include "quant/dates.hpp"

#include <cctype>
#include <cstdio>

#include "quant/core.hpp"

namespace quant {

// Civil <-> serial conversions use the standard era-based algorithms
// (exact for the proleptic Gregorian calendar, no overflow in our range).
static int days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int>(doe) - 719468;
}

static void civil_from_days(int z, int& y, int& m, int& d) {
    z += 719468;
    const int era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int yr = static_cast<int>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = yr + (m <= 2);
}

Date make_date(int year, int month, int day) {
    require(month >= 1 && month <= 12 && day >= 1 && day <= 31,
            "invalid calendar day");
    return Date{days_from_civil(year, month, day)};
}

void civil_from_date(Date dt, int& year, int& month, int& day) {
    civil_from_days(dt.serial, year, month, day);
}

int weekday(Date dt) {
    // 1970-01-01 was a Thursday (4).
    int w = (dt.serial + 4) % 7;
    return w < 0 ? w + 7 : w;
}

Date parse_date(const std::string& iso) {
    int y = 0, m = 0, d = 0;
    if (std::sscanf(iso.c_str(), "%4d-%2d-%2d", &y, &m, &d) != 3 ||
        iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
        fail("invalid date '" + iso + "' (expected YYYY-MM-DD)");
    return make_date(y, m, d);
}

std::string format_date(Date dt) {
    int y, m, d;
    civil_from_date(dt, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
    return buf;
}

bool looks_like_date(const std::string& token) {
    if (token.size() != 10 || token[4] != '-' || token[7] != '-') return false;
    for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (!std::isdigit(static_cast<unsigned char>(token[i]))) return false;
    return true;
}

}  // namespace quant
