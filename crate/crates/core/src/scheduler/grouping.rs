use crate::model::{
    check_totals_feasible, GroupId, GroupedJob, GroupingMode, Job, JobId, Resource,
    SchedulingParams,
};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupingOutcome {
    pub groups: Vec<GroupedJob>,
    /// Jobs that fit no resource on the first round, awaiting a second one.
    pub overflow: Vec<JobId>,
    /// Overflow jobs that no resource could take after the drain.
    pub rejected: Vec<JobId>,
    pub passes: usize,
}

impl GroupingOutcome {
    pub fn grouped_job_ids(&self) -> impl Iterator<Item = JobId> + '_ {
        self.groups.iter().flat_map(|g| g.members().iter().copied())
    }

    fn next_group_id(&self) -> u32 {
        self.groups.iter().map(|g| g.group_id.0).max().unwrap_or(0) + 1
    }
}

/// Groups jobs onto resources first-come-first-serve.
///
/// Resources are visited cyclically in the given order. On each visit the
/// next jobs are appended while the group stays feasible under `mode`; the
/// job that would break feasibility opens the attempt on the next resource.
/// A job that cannot start a group on any resource is moved to overflow.
pub fn group_jobs(
    jobs: &[Job],
    resources: &[Resource],
    params: &SchedulingParams,
    mode: GroupingMode,
) -> GroupingOutcome {
    group_from(jobs, resources, params, mode, 1)
}

fn group_from(
    jobs: &[Job],
    resources: &[Resource],
    params: &SchedulingParams,
    mode: GroupingMode,
    first_group_id: u32,
) -> GroupingOutcome {
    let mut outcome = GroupingOutcome::default();
    if resources.is_empty() {
        outcome.overflow = jobs.iter().map(|j| j.job_id).collect();
        return outcome;
    }

    let mut next_id = first_group_id;
    let mut cursor = 0;
    let mut visits = 0usize;
    let mut fruitless = 0;
    while cursor < jobs.len() {
        let resource = &resources[visits % resources.len()];
        visits += 1;

        let (mut mi, mut mem) = (0.0, 0.0);
        let start = cursor;
        while let Some(job) = jobs.get(cursor) {
            let (next_mi, next_mem) = (mi + job.length_mi, mem + job.memory_mb);
            if !check_totals_feasible(next_mi, next_mem, resource, params, mode).is_feasible() {
                break;
            }
            (mi, mem) = (next_mi, next_mem);
            cursor += 1;
        }

        if cursor > start {
            let group = GroupedJob::from_jobs(
                GroupId(next_id),
                resource.resource_id.clone(),
                &jobs[start..cursor],
            )
            .expect("jobs are sorted by submit_seq and the slice is nonempty");
            next_id += 1;
            outcome.groups.push(group);
            fruitless = 0;
        } else {
            fruitless += 1;
            if fruitless == resources.len() {
                outcome.overflow.push(jobs[cursor].job_id);
                cursor += 1;
                fruitless = 0;
            }
        }
    }
    outcome.passes = visits.div_ceil(resources.len());
    outcome
}

/// Re-offers overflow jobs to `resources` once the primary list is grouped.
/// Whatever still fits nowhere becomes a terminal rejection.
pub fn drain_overflow(
    mut outcome: GroupingOutcome,
    jobs: &[Job],
    resources: &[Resource],
    params: &SchedulingParams,
    mode: GroupingMode,
) -> GroupingOutcome {
    if outcome.overflow.is_empty() {
        return outcome;
    }
    let waiting: Vec<Job> = jobs
        .iter()
        .filter(|j| outcome.overflow.contains(&j.job_id))
        .cloned()
        .collect();
    let retry = group_from(&waiting, resources, params, mode, outcome.next_group_id());
    outcome.groups.extend(retry.groups);
    outcome.rejected.extend(retry.overflow);
    outcome.overflow.clear();
    outcome.passes += retry.passes;
    outcome
}
