/* Plans task B on the exact simulator and prints the JSON report.
 *
 *   cargo build -p semplan-ffi --release
 *   cc -I crates/ffi/include crates/ffi/c/plan_demo.c \
 *      -L target/release -lsemplan_ffi -o plan_demo
 *   LD_LIBRARY_PATH=target/release ./plan_demo
 */
#include <stdio.h>

#include "semplan.h"

static int fail(const char *what, SemplanStatus s) {
    const char *msg = semplan_last_error();
    fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, msg ? msg : "");
    return 1;
}

int main(void) {
    size_t counts[2] = {3, 3};
    SemplanWorld *world = NULL;
    SemplanPlanner *planner = NULL;
    char *report = NULL;
    SemplanStatus s;

    printf("semplan %s\n", semplan_version());
    if ((s = semplan_world_sample(counts, 2, 7, &world)) != SEMPLAN_STATUS_OK)
        return fail("sample", s);
    if ((s = semplan_planner_new("pick_place,tray_slide", NULL, &planner)) != SEMPLAN_STATUS_OK) {
        semplan_world_free(world);
        return fail("planner", s);
    }
    s = semplan_planner_plan(planner, world, "B", 0, &report);
    if (s == SEMPLAN_STATUS_OK) {
        printf("%s\n", report);
        semplan_string_free(report);
    }
    semplan_planner_free(planner);
    semplan_world_free(world);
    return s == SEMPLAN_STATUS_OK ? 0 : fail("plan", s);
}
