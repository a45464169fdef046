#pragma once

#include "redcheck/decide.hpp"
#include "redcheck/lang.hpp"
#include "redcheck/oracle.hpp"
#include "redcheck/report.hpp"
#include "redcheck/snt.hpp"
#include "redcheck/symbolic.hpp"
#include "redcheck/transforms.hpp"
