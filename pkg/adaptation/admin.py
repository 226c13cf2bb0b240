from django.contrib import admin
from django.urls import reverse
from django.utils.html import format_html
from .models import ExperimentRun, IterationRecord


class IterationRecordInline(admin.TabularInline):
    model = IterationRecord
    extra = 0
    can_delete = False
    fields = ('iteration', 'lr', 'stance_loss', 'subj_loss', 'obj_loss', 'conf_subj_loss', 'conf_obj_loss', 'val_macro_f1')
    readonly_fields = fields
    ordering = ('iteration',)

    def has_add_permission(self, request, obj=None):
        return False


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ('__str__', 'variant', 'status', 'seed', 'val_macro_f1', 'target_macro_f1', 'created_by', 'created_at')
    list_filter = ('status', 'view_mode', 'aligner_kind', 'created_at')
    search_fields = ('name', 'output_dir', 'created_by__username')
    readonly_fields = ('id', 'variant', 'created_at', 'started_at', 'finished_at', 'iteration_count', 'trace_link')
    fieldsets = (
        (None, {
            'fields': ('id', 'name', 'status', 'created_by')
        }),
        ('Configuration', {
            'fields': ('variant', 'view_mode', 'aligner_kind', 'seed', 'config', 'output_dir')
        }),
        ('Results', {
            'fields': ('best_iteration', 'iterations_run', 'stopped_early', 'val_macro_f1', 'target_macro_f1',
                       'iteration_count', 'trace_link', 'error_message')
        }),
        ('Timestamps', {
            'fields': ('created_at', 'started_at', 'finished_at'),
            'classes': ('collapse',)
        }),
    )
    inlines = [IterationRecordInline]

    def variant(self, obj):
        return obj.variant
    variant.short_description = 'Variant'

    def iteration_count(self, obj):
        return obj.iterations.count()
    iteration_count.short_description = 'Logged iterations'

    def trace_link(self, obj):
        if obj.id:
            url = reverse('admin:adaptation_iterationrecord_changelist') + f'?run__id__exact={obj.id}'
            return format_html('<a href="{}">View trace</a>', url)
        return '-'
    trace_link.short_description = 'Iteration trace'


@admin.register(IterationRecord)
class IterationRecordAdmin(admin.ModelAdmin):
    list_display = ('run', 'iteration', 'lr', 'stance_loss', 'conf_subj_loss', 'conf_obj_loss', 'val_macro_f1')
    list_filter = ('run__view_mode', 'run__aligner_kind')
    search_fields = ('run__name',)
    readonly_fields = ('run', 'iteration', 'lr', 'stance_loss', 'subj_loss', 'obj_loss',
                       'conf_subj_loss', 'conf_obj_loss', 'val_macro_f1', 'seconds')
    ordering = ('run', 'iteration')
